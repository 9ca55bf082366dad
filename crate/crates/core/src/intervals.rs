//! Interval construction: censor-defined intervals and user-specified grids
//! decomposed into sub-intervals on the merged censor/grid time set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FittedModel;
use crate::survival::SurvivalDataset;

/// How the number of subjects eligible at the start of an interval is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtRiskConvention {
    /// Subjects with `time > lower`: everyone still under observation when
    /// the interval opens. This is the standard Kaplan-Meier risk set.
    #[default]
    RiskSet,
    /// `E + C - events(≤ lower) - censors(≤ upper)`: subjects censored inside
    /// the interval (including at its closed upper end) are removed up front.
    CensorsInclusive,
}

impl AtRiskConvention {
    fn count(self, data: &SurvivalDataset, lower: f64, upper: f64) -> u64 {
        let n = match self {
            AtRiskConvention::RiskSet => data.count_beyond(lower),
            AtRiskConvention::CensorsInclusive => {
                let events_before = data.events_in(f64::NEG_INFINITY, lower);
                let censors_through = data.censors_in(f64::NEG_INFINITY, upper);
                data.len() - events_before - censors_through
            }
        };
        n as u64
    }
}

/// Right-closed interval `(lower, upper]` with its binomial ingredients.
///
/// In specified mode the interval also carries the sub-intervals it is
/// built from; its event distribution is then their sum of binomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub n_at_risk: u64,
    /// `P(lower < T <= upper | T > lower)` under the model.
    pub p_model: f64,
    pub n_events: u64,
    pub n_censors: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subintervals: Vec<Interval>,
}

impl Interval {
    /// Model-expected events: `N·p`, or `Σ N_m·p_m` over sub-intervals.
    pub fn expected_events(&self) -> f64 {
        if self.subintervals.is_empty() {
            self.n_at_risk as f64 * self.p_model
        } else {
            self.subintervals.iter().map(|s| s.n_at_risk as f64 * s.p_model).sum()
        }
    }

    /// Binomial parameters of the event count: one term, or one per sub-interval.
    pub fn binomial_terms(&self) -> Vec<(u64, f64)> {
        if self.subintervals.is_empty() {
            vec![(self.n_at_risk, self.p_model)]
        } else {
            self.subintervals.iter().map(|s| (s.n_at_risk, s.p_model)).collect()
        }
    }

    pub fn label(&self) -> String {
        format!("({}, {}]", fmt_bound(self.lower), fmt_bound(self.upper))
    }
}

fn fmt_bound(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Boundaries `S_0 < S_1 < … < S_K` of user-specified intervals `(S_{k-1}, S_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecifiedGrid {
    boundaries: Vec<f64>,
}

impl SpecifiedGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidInput("a grid needs at least two boundaries".into()));
        }
        if boundaries.iter().any(|b| !b.is_finite() || *b < 0.0) || boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneGrid);
        }
        Ok(Self { boundaries })
    }

    /// `k` equal-width intervals on `(0, end]`, with the last boundary exactly `end`.
    pub fn even(end: f64, k: usize) -> Result<Self> {
        if k == 0 || !(end > 0.0) {
            return Err(Error::InvalidInput(format!("cannot split (0, {end}] into {k} intervals")));
        }
        let mut b: Vec<f64> = (0..=k).map(|i| end * i as f64 / k as f64).collect();
        b[k] = end;
        Self::new(b)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn n_intervals(&self) -> usize {
        self.boundaries.len() - 1
    }
}

/// Ten equal intervals from 0 to the largest censor time.
pub fn default_ten_interval_grid(data: &SurvivalDataset) -> Result<SpecifiedGrid> {
    let t_max = data.max_censor_time().ok_or(Error::NoCensors)?;
    SpecifiedGrid::even(t_max, 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeMode {
    Censor,
    Specified,
}

/// Contiguous intervals with their model probabilities and observed counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScheme {
    pub mode: SchemeMode,
    pub convention: AtRiskConvention,
    pub intervals: Vec<Interval>,
    /// Events outside the scheme's span (after the last censor time in
    /// censor mode, outside `(S_0, S_K]` in specified mode).
    pub events_outside: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Build one interval per consecutive pair of `bounds` (which start at 0).
fn build_intervals(
    data: &SurvivalDataset,
    model: &FittedModel,
    bounds: &[f64],
    convention: AtRiskConvention,
) -> Result<Vec<Interval>> {
    bounds
        .windows(2)
        .map(|w| {
            let (lower, upper) = (w[0], w[1]);
            Ok(Interval {
                lower,
                upper,
                n_at_risk: convention.count(data, lower, upper),
                p_model: model.interval_prob(lower, upper)?,
                n_events: data.events_in(lower, upper) as u64,
                n_censors: data.censors_in(lower, upper) as u64,
                subintervals: Vec::new(),
            })
        })
        .collect()
}

/// Intervals `(t'_{j-1}, t'_j]` between consecutive distinct censor times.
pub fn build_censor_scheme(data: &SurvivalDataset, model: &FittedModel) -> Result<IntervalScheme> {
    build_censor_scheme_with(data, model, AtRiskConvention::default())
}

pub fn build_censor_scheme_with(
    data: &SurvivalDataset,
    model: &FittedModel,
    convention: AtRiskConvention,
) -> Result<IntervalScheme> {
    if data.n_censors() == 0 {
        return Err(Error::NoCensors);
    }
    let mut bounds = Vec::with_capacity(data.unique_censor_times().len() + 1);
    bounds.push(0.0);
    bounds.extend_from_slice(data.unique_censor_times());
    let intervals = build_intervals(data, model, &bounds, convention)?;
    let last = *bounds.last().unwrap();
    Ok(IntervalScheme {
        mode: SchemeMode::Censor,
        convention,
        intervals,
        events_outside: data.events_in(last, f64::INFINITY),
        warnings: Vec::new(),
    })
}

/// Intervals `(S_{k-1}, S_k]` of `grid`, each pooled from sub-intervals cut
/// at every censor time and grid boundary.
pub fn build_specified_scheme(data: &SurvivalDataset, model: &FittedModel, grid: &SpecifiedGrid) -> Result<IntervalScheme> {
    build_specified_scheme_with(data, model, grid, AtRiskConvention::default())
}

pub fn build_specified_scheme_with(
    data: &SurvivalDataset,
    model: &FittedModel,
    grid: &SpecifiedGrid,
    convention: AtRiskConvention,
) -> Result<IntervalScheme> {
    let s = grid.boundaries();
    let (start, end) = (s[0], s[s.len() - 1]);
    let mut warnings = Vec::new();
    if end > data.max_time() {
        warnings.push(format!("grid ends at {end}, beyond the largest observed time {}", data.max_time()));
    }

    // merged, deduplicated time set τ on (0, S_K]
    let mut tau: Vec<f64> = data.unique_censor_times().iter().copied().filter(|&t| t <= end).chain(s.iter().copied()).filter(|&t| t > 0.0).collect();
    tau.sort_by(f64::total_cmp);
    tau.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let mut bounds = Vec::with_capacity(tau.len() + 1);
    bounds.push(0.0);
    bounds.extend(tau);

    let subs = build_intervals(data, model, &bounds, convention)?;
    let mut subs = subs.into_iter().skip_while(|i| i.upper <= start).peekable();

    let mut intervals = Vec::with_capacity(grid.n_intervals());
    for w in s.windows(2) {
        let (lower, upper) = (w[0], w[1]);
        let mut members = Vec::new();
        while let Some(sub) = subs.next_if(|i| i.upper <= upper) {
            members.push(sub);
        }
        debug_assert!(!members.is_empty());
        intervals.push(Interval {
            lower,
            upper,
            n_at_risk: convention.count(data, lower, upper),
            p_model: model.interval_prob(lower, upper)?,
            n_events: members.iter().map(|m| m.n_events).sum(),
            n_censors: members.iter().map(|m| m.n_censors).sum(),
            subintervals: members,
        });
    }
    let events_outside = data.n_events() - data.events_in(start, end);
    Ok(IntervalScheme { mode: SchemeMode::Specified, convention, intervals, events_outside, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;

    fn exp_model(data: &SurvivalDataset, rate: f64) -> FittedModel {
        FittedModel::with_params(Family::Exponential, vec![rate], data).unwrap()
    }

    #[test]
    fn single_censor_first_row() {
        // ten records, three events before the single censor at 5
        let pairs = [(1.0, 1), (2.0, 1), (3.0, 1), (5.0, 0), (6.0, 1), (7.0, 1), (8.0, 1), (9.0, 1), (10.0, 1), (11.0, 1)];
        let d = SurvivalDataset::from_pairs(&pairs).unwrap();
        let m = exp_model(&d, 0.1);
        let s = build_censor_scheme(&d, &m).unwrap();
        assert_eq!(s.intervals.len(), 1);
        assert_eq!((s.intervals[0].lower, s.intervals[0].upper), (0.0, 5.0));
        assert_eq!(s.intervals[0].n_at_risk, 10);
        assert_eq!(s.intervals[0].n_events, 3);
        assert_eq!(s.events_outside, 6);
        let verbatim = build_censor_scheme_with(&d, &m, AtRiskConvention::CensorsInclusive).unwrap();
        assert_eq!(verbatim.intervals[0].n_at_risk, 10 - 1);
    }

    #[test]
    fn no_censors_is_an_error() {
        let d = SurvivalDataset::from_pairs(&[(1.0, 1), (2.0, 1)]).unwrap();
        assert!(matches!(build_censor_scheme(&d, &exp_model(&d, 0.5)), Err(Error::NoCensors)));
        assert!(matches!(default_ten_interval_grid(&d), Err(Error::NoCensors)));
    }

    #[test]
    fn ten_interval_grid() {
        let pairs: Vec<(f64, u8)> = (1..=10).map(|i| (i as f64, (i % 3 == 0) as u8)).collect();
        let mut pairs = pairs;
        pairs.push((10.0, 0));
        let d = SurvivalDataset::from_pairs(&pairs).unwrap();
        let g = default_ten_interval_grid(&d).unwrap();
        assert_eq!(g.boundaries(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        let odd = SpecifiedGrid::even(43.36, 10).unwrap();
        assert_eq!(*odd.boundaries().last().unwrap(), 43.36);
        assert!((odd.boundaries()[1] - 4.336).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(SpecifiedGrid::new(vec![0.0]).is_err());
        assert!(SpecifiedGrid::new(vec![0.0, 2.0, 2.0]).is_err());
        assert!(SpecifiedGrid::new(vec![-1.0, 2.0]).is_err());
        assert!(SpecifiedGrid::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn specified_on_censor_times_reduces_to_censor_scheme() {
        let pairs = [(0.5, 1), (1.0, 0), (1.2, 1), (1.6, 0), (2.0, 1), (2.0, 0), (2.5, 0), (3.0, 1), (3.1, 1), (4.0, 0)];
        let d = SurvivalDataset::from_pairs(&pairs).unwrap();
        let m = exp_model(&d, 0.3);
        let censor = build_censor_scheme(&d, &m).unwrap();
        let mut bounds = vec![0.0];
        bounds.extend_from_slice(d.unique_censor_times());
        let spec = build_specified_scheme(&d, &m, &SpecifiedGrid::new(bounds).unwrap()).unwrap();
        assert_eq!(spec.intervals.len(), censor.intervals.len());
        for (a, b) in spec.intervals.iter().zip(&censor.intervals) {
            assert_eq!(a.subintervals.len(), 1);
            assert_eq!((a.lower, a.upper, a.n_at_risk, a.n_events, a.n_censors), (b.lower, b.upper, b.n_at_risk, b.n_events, b.n_censors));
            assert_eq!(a.p_model, b.p_model);
            assert_eq!(a.binomial_terms(), b.binomial_terms());
        }
    }

    #[test]
    fn specified_grid_with_positive_start() {
        let pairs = [(0.5, 1), (1.0, 0), (1.5, 1), (2.0, 1), (2.5, 0), (3.0, 1), (3.5, 0)];
        let d = SurvivalDataset::from_pairs(&pairs).unwrap();
        let m = exp_model(&d, 0.3);
        let spec = build_specified_scheme(&d, &m, &SpecifiedGrid::new(vec![1.0, 2.0, 3.5]).unwrap()).unwrap();
        assert_eq!(spec.intervals.len(), 2);
        assert_eq!(spec.intervals[0].n_events, 2);
        assert_eq!(spec.intervals[1].n_events, 1);
        assert_eq!(spec.intervals[0].subintervals.first().unwrap().lower, 1.0);
        assert_eq!(spec.events_outside, 1);
        assert_eq!(spec.intervals[0].n_at_risk, 5);
        assert!(spec.warnings.is_empty());
        let beyond = build_specified_scheme(&d, &m, &SpecifiedGrid::new(vec![0.0, 10.0]).unwrap()).unwrap();
        assert_eq!(beyond.warnings.len(), 1);
    }

    #[test]
    fn labels() {
        let i = Interval { lower: 1.6, upper: 2.5, n_at_risk: 1, p_model: 0.1, n_events: 0, n_censors: 1, subintervals: vec![] };
        assert_eq!(i.label(), "(1.6, 2.5]");
        let j = Interval { lower: 0.0, upper: 4.336, ..i };
        assert_eq!(j.label(), "(0, 4.34]");
    }
}
