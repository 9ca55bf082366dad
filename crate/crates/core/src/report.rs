//! Report bundle, CSV tables and the three-panel SVG figure.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::intervals::{
    build_censor_scheme_with, build_specified_scheme_with, AtRiskConvention, IntervalScheme, SpecifiedGrid,
};
use crate::models::{FittedModel, ModelJson};
use crate::survival::{at_risk_table, kaplan_meier, DatasetSummary, SurvivalDataset};
use crate::verdicts::{run_full_test, Flag, IntervalTestResult, PValueMode};

pub const SCHEMA: &str = "survcheck.report/1";
const CURVE_POINTS: usize = 101;
const AT_RISK_POINTS: usize = 5;

/// Which intervals to test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IntervalSpec {
    /// Between consecutive distinct censor times.
    Censor,
    /// `k` equal intervals up to the largest censor time.
    Fixed { k: usize },
    Grid { boundaries: Vec<f64> },
}

impl IntervalSpec {
    pub fn build(&self, data: &SurvivalDataset, model: &FittedModel, convention: AtRiskConvention) -> Result<IntervalScheme> {
        match self {
            IntervalSpec::Censor => build_censor_scheme_with(data, model, convention),
            IntervalSpec::Fixed { k } => {
                let end = data.max_censor_time().ok_or(Error::NoCensors)?;
                build_specified_scheme_with(data, model, &SpecifiedGrid::even(end, *k)?, convention)
            }
            IntervalSpec::Grid { boundaries } => {
                build_specified_scheme_with(data, model, &SpecifiedGrid::new(boundaries.clone())?, convention)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            IntervalSpec::Censor => "censor".into(),
            IntervalSpec::Fixed { k } => format!("fixed:{k}"),
            IntervalSpec::Grid { boundaries } => format!("grid:{} intervals", boundaries.len().saturating_sub(1)),
        }
    }
}

/// Parses `censor` or `fixed:K`; grids come from files and are built directly.
impl FromStr for IntervalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("censor") {
            return Ok(IntervalSpec::Censor);
        }
        if let Some(k) = s.strip_prefix("fixed:") {
            let k: usize = k.parse().map_err(|_| Error::InvalidInput(format!("bad interval count in `{s}`")))?;
            if k == 0 {
                return Err(Error::InvalidInput("fixed:K needs K >= 1".into()));
            }
            return Ok(IntervalSpec::Fixed { k });
        }
        Err(Error::InvalidInput(format!("unknown interval mode `{s}`; use censor, fixed:K or grid:FILE")))
    }
}

/// Parse grid boundaries from JSON (`[..]` or `{"boundaries": [..]}`) or
/// whitespace/comma separated text.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    if let Ok(v) = serde_json::from_str::<Value>(text) {
        let arr = match &v {
            Value::Array(_) => &v,
            Value::Object(map) => map.get("boundaries").ok_or_else(|| Error::InvalidInput("grid JSON needs `boundaries`".into()))?,
            _ => return Err(Error::InvalidInput("grid JSON must be an array or object".into())),
        };
        return serde_json::from_value(arr.clone()).map_err(Error::from);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidInput(format!("grid value `{t}` is not a number"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub version: String,
    pub intervals: IntervalSpec,
    pub pvalues: PValueMode,
    pub convention: AtRiskConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmRow {
    pub time: f64,
    pub survival: f64,
    pub at_risk: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtRiskRow {
    pub time: f64,
    pub at_risk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub interval: String,
    pub lower: f64,
    pub upper: f64,
    pub n_risk: u64,
    pub p_model: f64,
    pub events: u64,
    pub censors: u64,
    pub expected: f64,
    pub p_value: Option<f64>,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallBlock {
    pub n_tested: usize,
    pub t_cont: f64,
    pub tft_pvalue: f64,
    pub tft_degenerate: bool,
    pub t_pavsi: usize,
    pub pavsi_pvalue: f64,
    pub bonferroni_reject: bool,
    pub n_bonferroni: usize,
    /// Flagged at the individual level only.
    pub n_individual_flags: usize,
    pub n_extreme: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelJson,
    pub intervals: Vec<IntervalRow>,
    pub overall: OverallBlock,
    pub events_outside: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema: String,
    pub metadata: ReportMetadata,
    pub dataset: DatasetSummary,
    pub kaplan_meier: Vec<KmRow>,
    pub censor_times: Vec<f64>,
    pub at_risk: Vec<AtRiskRow>,
    pub results: Vec<ModelReport>,
}

/// Test every model on the same data and collect one bundle.
pub fn build_report(
    data: &SurvivalDataset,
    models: &[FittedModel],
    spec: &IntervalSpec,
    mode: &PValueMode,
    convention: AtRiskConvention,
) -> Result<ReportBundle> {
    if models.is_empty() {
        return Err(Error::InvalidInput("no model to test".into()));
    }
    let t_max = data.max_time();
    let km = kaplan_meier(data);
    let grid: Vec<f64> = (0..AT_RISK_POINTS).map(|i| t_max * i as f64 / (AT_RISK_POINTS - 1) as f64).collect();
    let at_risk = at_risk_table(data, &grid)?
        .into_iter()
        .zip(&grid)
        .map(|(at_risk, &time)| AtRiskRow { time, at_risk })
        .collect();

    let results = models
        .iter()
        .map(|model| {
            let scheme = spec.build(data, model, convention)?;
            let result = run_full_test(&scheme, mode)?;
            Ok(model_report(model, &scheme, &result, t_max))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ReportBundle {
        schema: SCHEMA.into(),
        metadata: ReportMetadata {
            version: env!("CARGO_PKG_VERSION").into(),
            intervals: spec.clone(),
            pvalues: *mode,
            convention,
        },
        dataset: data.summary(),
        kaplan_meier: km.steps.iter().map(|s| KmRow { time: s.time, survival: s.survival, at_risk: s.at_risk }).collect(),
        censor_times: data.unique_censor_times().to_vec(),
        at_risk,
        results,
    })
}

fn model_report(model: &FittedModel, scheme: &IntervalScheme, result: &IntervalTestResult, t_max: f64) -> ModelReport {
    let intervals = scheme
        .intervals
        .iter()
        .zip(&result.verdicts)
        .map(|(iv, v)| IntervalRow {
            interval: iv.label(),
            lower: iv.lower,
            upper: iv.upper,
            n_risk: iv.n_at_risk,
            p_model: iv.p_model,
            events: iv.n_events,
            censors: iv.n_censors,
            expected: iv.expected_events(),
            p_value: v.p_value.map(|p| p.value),
            flag: v.flag,
        })
        .collect();
    let curve = (0..CURVE_POINTS)
        .map(|i| {
            let time = t_max * i as f64 / (CURVE_POINTS - 1) as f64;
            CurvePoint { time, survival: model.survival(time) }
        })
        .collect();
    ModelReport {
        model: model.to_json(),
        intervals,
        overall: OverallBlock {
            n_tested: result.n_tested,
            t_cont: result.t_cont,
            tft_pvalue: result.tft_pvalue,
            tft_degenerate: result.tft_degenerate,
            t_pavsi: result.t_pavsi,
            pavsi_pvalue: result.pavsi_pvalue,
            bonferroni_reject: result.bonferroni_reject,
            n_bonferroni: result.n_bonferroni,
            n_individual_flags: result.n_individual_only,
            n_extreme: result.n_extreme(),
        },
        events_outside: scheme.events_outside,
        warnings: scheme.warnings.clone(),
        curve,
    }
}

fn flag_label(flag: Flag) -> &'static str {
    match flag {
        Flag::None => "",
        Flag::Individual => "individual",
        Flag::Bonferroni => "bonferroni",
    }
}

/// Per-interval table; p-values rounded to 4 decimals.
pub fn intervals_csv(report: &ModelReport) -> String {
    let mut out = String::from("interval,n_risk,p_model,events,expected,p_value,flag\n");
    for r in &report.intervals {
        let p = r.p_value.map(|p| format!("{p:.4}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "\"{}\",{},{:.6},{},{:.3},{},{}",
            r.interval,
            r.n_risk,
            r.p_model,
            r.events,
            r.expected,
            p,
            flag_label(r.flag)
        );
    }
    out
}

/// One row per model with the overall statistics.
pub fn overall_csv(bundle: &ReportBundle) -> String {
    let mut out = String::from(
        "family,n_tested,t_cont,tft_p,t_pavsi,pavsi_p,bonferroni_reject,n_bonferroni,n_individual_flags,n_extreme\n",
    );
    for r in &bundle.results {
        let o = &r.overall;
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{},{:.4},{},{},{},{}",
            r.model.family,
            o.n_tested,
            o.t_cont,
            o.tft_pvalue,
            o.t_pavsi,
            o.pavsi_pvalue,
            o.bonferroni_reject,
            o.n_bonferroni,
            o.n_individual_flags,
            o.n_extreme
        );
    }
    out
}

/// Accept a single model, an array of models, a fit output `{"models": [..]}`
/// or a report bundle `{"results": [{"model": ..}]}`.
pub fn parse_models(text: &str) -> Result<Vec<ModelJson>> {
    let value: Value = serde_json::from_str(text)?;
    let items: Vec<Value> = match value {
        Value::Array(items) => items,
        Value::Object(ref map) if map.contains_key("family") => vec![value],
        Value::Object(mut map) => {
            if let Some(Value::Array(models)) = map.remove("models") {
                models
            } else if let Some(Value::Array(results)) = map.remove("results") {
                results
                    .into_iter()
                    .map(|r| match r {
                        Value::Object(mut m) => m.remove("model").ok_or_else(|| Error::InvalidInput("result without `model`".into())),
                        _ => Err(Error::InvalidInput("result entry is not an object".into())),
                    })
                    .collect::<Result<_>>()?
            } else {
                return Err(Error::InvalidInput("no model found: expected `family`, `models` or `results`".into()));
            }
        }
        _ => return Err(Error::InvalidInput("model JSON must be an object or array".into())),
    };
    if items.is_empty() {
        return Err(Error::InvalidInput("model list is empty".into()));
    }
    items.into_iter().map(|v| serde_json::from_value(v).map_err(Error::from)).collect()
}

const WIDTH: f64 = 720.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const KM_TOP: f64 = 30.0;
const KM_HEIGHT: f64 = 300.0;
const STRIP_TOP: f64 = 360.0;
const STRIP_HEIGHT: f64 = 24.0;
const RISK_TOP: f64 = 420.0;
const HEIGHT: f64 = 470.0;
const KM_COLOR: &str = "#6a3d9a";

/// Three stacked panels for one model: Kaplan-Meier estimate with the fitted
/// curve, the interval flag strip, and numbers at risk.
pub fn render_svg(bundle: &ReportBundle, model_index: usize) -> Result<String> {
    let report = bundle
        .results
        .get(model_index)
        .ok_or_else(|| Error::InvalidInput(format!("report has no model #{model_index}")))?;
    let t_max = bundle
        .kaplan_meier
        .iter()
        .map(|r| r.time)
        .chain(bundle.censor_times.iter().copied())
        .chain(report.intervals.last().map(|r| r.upper))
        .fold(bundle.dataset.max_time, f64::max);
    let plot_w = WIDTH - LEFT - RIGHT;
    let x = |t: f64| LEFT + plot_w * t / t_max;
    let y = |s: f64| KM_TOP + KM_HEIGHT * (1.0 - s);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="18" font-size="13">{} model</text>"#, report.model.family);

    // axes
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT} {KM_TOP} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        KM_TOP + KM_HEIGHT,
        LEFT + plot_w
    );
    for i in 0..=4 {
        let s = i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            LEFT - 6.0,
            y(s) + 4.0,
            s
        );
    }

    // interval boundaries
    for r in &report.intervals {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{KM_TOP}" x2="{0:.2}" y2="{1:.2}" stroke="grey" stroke-width="0.6" stroke-dasharray="3,3"/>"#,
            x(r.upper),
            KM_TOP + KM_HEIGHT
        );
    }

    // Kaplan-Meier step function
    let mut d = format!("M{:.2} {:.2}", x(0.0), y(1.0));
    for w in bundle.kaplan_meier.windows(2) {
        let _ = write!(d, " H{:.2} V{:.2}", x(w[1].time), y(w[1].survival));
    }
    let _ = write!(d, " H{:.2}", x(bundle.dataset.max_time));
    let _ = writeln!(svg, r#"<path d="{d}" fill="none" stroke="{KM_COLOR}" stroke-width="1.6"/>"#);

    // censor marks on the estimate
    for &c in &bundle.censor_times {
        let s = km_at(&bundle.kaplan_meier, c);
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{KM_COLOR}"/>"#,
            x(c),
            y(s) - 4.0,
            y(s) + 4.0
        );
    }

    // fitted curve
    let mut d = String::new();
    for (i, p) in report.curve.iter().enumerate() {
        let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, x(p.time), y(p.survival));
    }
    let _ = writeln!(svg, r#"<path d="{d}" fill="none" stroke="black" stroke-width="1.2"/>"#);

    // flag strip
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">flags</text>"#, LEFT - 6.0, STRIP_TOP + 16.0);
    for r in &report.intervals {
        let fill = match r.flag {
            Flag::None => "white",
            Flag::Individual => "#bbbbbb",
            Flag::Bonferroni => "#d7301f",
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{STRIP_TOP}" width="{:.2}" height="{STRIP_HEIGHT}" fill="{fill}" stroke="black" stroke-width="0.5"/>"#,
            x(r.lower),
            x(r.upper) - x(r.lower)
        );
    }

    // numbers at risk
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">at risk</text>"#, LEFT - 6.0, RISK_TOP + 20.0);
    for r in &bundle.at_risk {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x(r.time),
            RISK_TOP + 20.0,
            r.at_risk
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="dimgrey">{}</text>"#,
            x(r.time),
            RISK_TOP + 4.0,
            trim_number(r.time)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn km_at(rows: &[KmRow], t: f64) -> f64 {
    let idx = rows.partition_point(|r| r.time <= t);
    rows[idx.saturating_sub(1)].survival
}

fn trim_number(x: f64) -> String {
    let s = format!("{x:.1}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}
