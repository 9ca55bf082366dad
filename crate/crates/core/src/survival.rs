//! Right-censored survival data, Kaplan-Meier estimation and at-risk counts.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: follow-up time and whether the event was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !time.is_finite() || time <= 0.0 {
            return Err(Error::InvalidRecord(format!("time must be a positive finite number, got {time}")));
        }
        Ok(Self { time, event })
    }
}

/// Validated right-censored dataset.
///
/// Records keep their input order; event and censor times are additionally
/// held sorted so interval counts are binary searches.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
    event_times: Vec<f64>,
    censor_times: Vec<f64>,
    all_times: Vec<f64>,
    unique_censor_times: Vec<f64>,
}

impl SurvivalDataset {
    pub fn new(records: Vec<SurvivalRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for r in &records {
            SurvivalRecord::new(r.time, r.event)?;
        }
        let mut event_times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
        let mut censor_times: Vec<f64> = records.iter().filter(|r| !r.event).map(|r| r.time).collect();
        let mut all_times: Vec<f64> = records.iter().map(|r| r.time).collect();
        event_times.sort_by(f64::total_cmp);
        censor_times.sort_by(f64::total_cmp);
        all_times.sort_by(f64::total_cmp);
        let mut unique_censor_times = censor_times.clone();
        unique_censor_times.dedup_by(|a, b| a.to_bits() == b.to_bits());
        Ok(Self { records, event_times, censor_times, all_times, unique_censor_times })
    }

    /// Convenience constructor from `(time, event)` pairs with `event` in {0, 1}.
    pub fn from_pairs(pairs: &[(f64, u8)]) -> Result<Self> {
        let records = pairs
            .iter()
            .map(|&(t, e)| match e {
                0 | 1 => SurvivalRecord::new(t, e == 1),
                other => Err(Error::InvalidRecord(format!("event must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.event_times.len()
    }

    pub fn n_censors(&self) -> usize {
        self.censor_times.len()
    }

    /// Sorted event times (with ties).
    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    /// Sorted censor times (with ties).
    pub fn censor_times(&self) -> &[f64] {
        &self.censor_times
    }

    /// Strictly increasing distinct censor times.
    pub fn unique_censor_times(&self) -> &[f64] {
        &self.unique_censor_times
    }

    pub fn max_time(&self) -> f64 {
        *self.all_times.last().expect("dataset is non-empty")
    }

    pub fn max_censor_time(&self) -> Option<f64> {
        self.unique_censor_times.last().copied()
    }

    pub fn total_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).sum()
    }

    /// Number of records with `time > t`.
    pub fn count_beyond(&self, t: f64) -> usize {
        self.all_times.len() - self.all_times.partition_point(|&x| x <= t)
    }

    /// Events with `lower < time <= upper`.
    pub fn events_in(&self, lower: f64, upper: f64) -> usize {
        count_in(&self.event_times, lower, upper)
    }

    /// Censors with `lower < time <= upper`.
    pub fn censors_in(&self, lower: f64, upper: f64) -> usize {
        count_in(&self.censor_times, lower, upper)
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            n_records: self.len(),
            n_events: self.n_events(),
            n_censors: self.n_censors(),
            n_unique_censor_times: self.unique_censor_times.len(),
            max_time: self.max_time(),
            max_censor_time: self.max_censor_time(),
        }
    }
}

fn count_in(sorted: &[f64], lower: f64, upper: f64) -> usize {
    let hi = sorted.partition_point(|&x| x <= upper);
    let lo = sorted.partition_point(|&x| x <= lower);
    hi.saturating_sub(lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_records: usize,
    pub n_events: usize,
    pub n_censors: usize,
    pub n_unique_censor_times: usize,
    pub max_time: f64,
    pub max_censor_time: Option<f64>,
}

/// Read a delimited table with `time` and `event` columns.
///
/// The delimiter is picked from comma, tab or semicolon by counting
/// occurrences in the header line. Column names are matched
/// case-insensitively; extra columns are ignored.
pub fn load_dataset<R: Read>(mut source: R) -> Result<SurvivalDataset> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let header = text.lines().find(|l| !l.trim().is_empty()).ok_or(Error::EmptyDataset)?;
    let delimiter = [b',', b'\t', b';']
        .into_iter()
        .max_by_key(|d| header.bytes().filter(|b| b == d).count())
        .unwrap_or(b',');

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim_matches('"').eq_ignore_ascii_case(name))
            .ok_or(Error::MissingColumn(name))
    };
    let time_col = column("time")?;
    let event_col = column("event")?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        let malformed = |message: String| Error::MalformedRow { line, message };
        let time_field = row.get(time_col).ok_or_else(|| malformed("missing time field".into()))?;
        let event_field = row.get(event_col).ok_or_else(|| malformed("missing event field".into()))?;
        let time: f64 = time_field
            .parse()
            .map_err(|_| malformed(format!("time `{time_field}` is not a number")))?;
        if !time.is_finite() || time <= 0.0 {
            return Err(malformed(format!("time must be positive, got {time_field}")));
        }
        let event = match event_field {
            "1" | "1.0" => true,
            "0" | "0.0" => false,
            other => return Err(malformed(format!("event must be 0 or 1, got `{other}`"))),
        };
        records.push(SurvivalRecord { time, event });
    }
    match records.len() {
        0 => Err(Error::EmptyDataset),
        1 => Err(Error::TooFewRows { required: 2, found: 1 }),
        _ => SurvivalDataset::new(records),
    }
}

/// One step of the product-limit curve, placed at a distinct event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: f64,
    pub survival: f64,
    pub at_risk: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeierCurve {
    /// Starts with `(0, 1.0)`; one further step per distinct event time.
    pub steps: Vec<KmStep>,
}

impl KaplanMeierCurve {
    /// Right-continuous survival estimate at `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.time <= t);
        self.steps[idx.saturating_sub(1)].survival
    }
}

/// Product-limit estimate. Events tied with censors at the same time are
/// processed first, so those censored subjects remain in the risk set.
pub fn kaplan_meier(data: &SurvivalDataset) -> KaplanMeierCurve {
    let n = data.len();
    let mut steps = vec![KmStep { time: 0.0, survival: 1.0, at_risk: n, events: 0 }];
    let times = data.event_times();
    let mut survival = 1.0;
    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        let d = times[i..].iter().take_while(|&&x| x == t).count();
        // risk set at t: time >= t
        let at_risk = data.all_times.len() - data.all_times.partition_point(|&x| x < t);
        survival *= 1.0 - d as f64 / at_risk as f64;
        steps.push(KmStep { time: t, survival, at_risk, events: d });
        i += d;
    }
    KaplanMeierCurve { steps }
}

/// Numbers at risk just after each grid time: `#{time > g}`.
pub fn at_risk_table(data: &SurvivalDataset, grid: &[f64]) -> Result<Vec<usize>> {
    if grid.iter().any(|g| !g.is_finite() || *g < 0.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneGrid);
    }
    Ok(grid.iter().map(|&g| data.count_beyond(g)).collect())
}
