//! Per-interval flags and the overall verdicts: Bonferroni, TFT and PAVSI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{binomial_pmf, chi_square_sf, midpoint_pvalue, randomized_pvalue, sum_of_binomials_pmf, PValue};
use crate::error::{Error, Result};
use crate::intervals::{IntervalScheme, SchemeMode};

/// Two-sided level split evenly between the tails.
pub const TAIL: f64 = 0.025;
/// Probability that a uniform p-value is flagged individually.
pub const FLAG_RATE: f64 = 2.0 * TAIL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PValueMode {
    Midpoint,
    Randomized { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    None,
    Individual,
    Bonferroni,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalVerdict {
    pub index: usize,
    /// `None` for censor intervals with nobody at risk; they are not tested.
    pub p_value: Option<PValue>,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTestResult {
    pub scheme_mode: SchemeMode,
    pub pvalue_mode: PValueMode,
    pub verdicts: Vec<IntervalVerdict>,
    /// Number of tested intervals, `I`.
    pub n_tested: usize,
    pub t_cont: f64,
    pub tft_pvalue: f64,
    /// Set when some folded p-value is exactly 0 and `t_cont` is infinite.
    pub tft_degenerate: bool,
    pub t_pavsi: usize,
    pub pavsi_pvalue: f64,
    pub bonferroni_reject: bool,
    pub n_bonferroni: usize,
    /// Individually flagged intervals that are not also Bonferroni rejections.
    pub n_individual_only: usize,
}

impl IntervalTestResult {
    pub fn pvalues(&self) -> Vec<f64> {
        self.verdicts.iter().filter_map(|v| v.p_value.map(|p| p.value)).collect()
    }

    /// Total extreme intervals, Bonferroni rejections included.
    pub fn n_extreme(&self) -> usize {
        self.n_bonferroni + self.n_individual_only
    }
}

pub fn is_extreme(p: f64) -> bool {
    p <= TAIL || p >= 1.0 - TAIL
}

/// Descriptive flag for `p <= 0.025` or `p >= 0.975`.
pub fn individual_flags(pvalues: &[f64]) -> Vec<bool> {
    pvalues.iter().map(|&p| is_extreme(p)).collect()
}

/// Reject intervals with `p <= 0.025/I` or `p >= 1 - 0.025/I`; the overall
/// test rejects when any interval does.
pub fn bonferroni_test(pvalues: &[f64], n_tested: usize) -> (Vec<bool>, bool) {
    assert!(n_tested >= 1, "Bonferroni correction needs at least one interval");
    let cut = TAIL / n_tested as f64;
    let rejected: Vec<bool> = pvalues.iter().map(|&p| p <= cut || p >= 1.0 - cut).collect();
    let any = rejected.iter().any(|&r| r);
    (rejected, any)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TftOutcome {
    pub statistic: f64,
    pub pvalue: f64,
    pub degenerate: bool,
}

/// Transformed Fisher test: fold each p-value to `U = 2 min(p, 1 - p)` and
/// refer `-2 Σ ln U` to chi-square with `2I` degrees of freedom.
pub fn tft(pvalues: &[f64]) -> TftOutcome {
    if pvalues.is_empty() {
        return TftOutcome { statistic: 0.0, pvalue: 1.0, degenerate: false };
    }
    let statistic: f64 = pvalues
        .iter()
        .map(|&p| {
            let u = if p <= 0.5 { 2.0 * p } else { 2.0 * (1.0 - p) };
            -2.0 * u.ln()
        })
        .sum();
    if statistic.is_infinite() {
        return TftOutcome { statistic, pvalue: 0.0, degenerate: true };
    }
    TftOutcome { statistic, pvalue: chi_square_sf(statistic, 2 * pvalues.len() as u32), degenerate: false }
}

/// Midpoint upper-tail p-value of `T ~ Binomial(I, 0.05)`: `P(T > t) + ½ P(T = t)`.
pub fn pavsi_pvalue(t: usize, n_tested: usize) -> f64 {
    let dist = binomial_pmf(n_tested as u64, FLAG_RATE).expect("valid probability");
    (dist.prob_above(t as u64) + 0.5 * dist.prob(t as u64)).clamp(0.0, 1.0)
}

/// PAVSI: count of extreme p-values and its binomial midpoint p-value.
pub fn pavsi(pvalues: &[f64]) -> (usize, f64) {
    let t = pvalues.iter().filter(|&&p| is_extreme(p)).count();
    (t, pavsi_pvalue(t, pvalues.len()))
}

/// Interval p-values, flags and all overall statistics for one scheme.
pub fn run_full_test(scheme: &IntervalScheme, mode: &PValueMode) -> Result<IntervalTestResult> {
    let mut rng = match mode {
        PValueMode::Randomized { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        PValueMode::Midpoint => None,
    };
    let mut pvalues: Vec<Option<PValue>> = Vec::with_capacity(scheme.intervals.len());
    for interval in &scheme.intervals {
        let testable = scheme.mode == SchemeMode::Specified || interval.n_at_risk >= 1;
        if !testable {
            pvalues.push(None);
            continue;
        }
        let dist = if interval.subintervals.is_empty() {
            binomial_pmf(interval.n_at_risk, interval.p_model)?
        } else {
            sum_of_binomials_pmf(&interval.binomial_terms())?
        };
        let p = match rng.as_mut() {
            Some(rng) => randomized_pvalue(&dist, interval.n_events, rng.gen::<f64>())?,
            None => midpoint_pvalue(&dist, interval.n_events)?,
        };
        pvalues.push(Some(p));
    }

    let tested: Vec<f64> = pvalues.iter().flatten().map(|p| p.value).collect();
    let n_tested = tested.len();
    if n_tested == 0 {
        return Err(Error::InvalidInput("no interval has anyone at risk".into()));
    }
    let (rejected, bonferroni_reject) = bonferroni_test(&tested, n_tested);
    let mut tested_iter = rejected.into_iter();
    let verdicts: Vec<IntervalVerdict> = pvalues
        .into_iter()
        .enumerate()
        .map(|(index, p_value)| {
            let flag = match p_value {
                None => Flag::None,
                Some(p) => {
                    let bonf = tested_iter.next().unwrap_or(false);
                    if bonf {
                        Flag::Bonferroni
                    } else if is_extreme(p.value) {
                        Flag::Individual
                    } else {
                        Flag::None
                    }
                }
            };
            IntervalVerdict { index, p_value, flag }
        })
        .collect();
    let fisher = tft(&tested);
    let (t_pavsi, pavsi_p) = pavsi(&tested);
    Ok(IntervalTestResult {
        scheme_mode: scheme.mode,
        pvalue_mode: *mode,
        n_tested,
        t_cont: fisher.statistic,
        tft_pvalue: fisher.pvalue,
        tft_degenerate: fisher.degenerate,
        t_pavsi,
        pavsi_pvalue: pavsi_p,
        bonferroni_reject,
        n_bonferroni: verdicts.iter().filter(|v| v.flag == Flag::Bonferroni).count(),
        n_individual_only: verdicts.iter().filter(|v| v.flag == Flag::Individual).count(),
        verdicts,
    })
}
