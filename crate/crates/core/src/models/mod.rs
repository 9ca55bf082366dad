//! Parametric survival models: evaluation, maximum-likelihood fitting and
//! the JSON exchange format for fitted parameters.

mod family;
pub mod optim;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

pub use family::Family;

use crate::error::{Error, Result};
use crate::survival::SurvivalDataset;
use optim::{nelder_mead, NelderMeadOptions};

const N_STARTS: usize = 5;
const JITTER: f64 = 0.5;
const START_SEED: u64 = 0x5eed_5eed;

/// A family with concrete parameters, plus its fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub family: Family,
    pub params: Vec<f64>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub converged: bool,
}

impl FittedModel {
    /// Wrap externally supplied parameters, scoring them on `data`.
    pub fn with_params(family: Family, params: Vec<f64>, data: &SurvivalDataset) -> Result<Self> {
        family.validate(&params)?;
        let log_likelihood = log_likelihood(family, &params, data);
        Ok(Self { family, params, log_likelihood, n_obs: data.len(), converged: true })
    }

    pub fn n_params(&self) -> usize {
        self.family.arity()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.family.param_names().iter().position(|n| *n == name).map(|i| self.params[i])
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.family.cdf(&self.params, t)
    }

    pub fn survival(&self, t: f64) -> f64 {
        self.family.survival(&self.params, t)
    }

    /// Survival limit for improper (cure-fraction) fits.
    pub fn plateau(&self) -> Option<f64> {
        self.family.plateau(&self.params)
    }

    /// `P(a < T <= b | T > a)`.
    pub fn interval_prob(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && b >= a) {
            return Err(Error::InvalidInput(format!("interval ({a}, {b}] is not ordered")));
        }
        let ln_sa = self.family.ln_survival(&self.params, a);
        if ln_sa == f64::NEG_INFINITY || ln_sa.is_nan() {
            return Err(Error::DegenerateInterval(a));
        }
        let ln_sb = self.family.ln_survival(&self.params, b);
        Ok((-(ln_sb - ln_sa).exp_m1()).clamp(0.0, 1.0))
    }

    pub fn aic(&self) -> f64 {
        information_criteria(self.log_likelihood, self.n_params(), self.n_obs).0
    }

    pub fn bic(&self) -> f64 {
        information_criteria(self.log_likelihood, self.n_params(), self.n_obs).1
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            family: self.family,
            beta: self.family.param_names().iter().map(|s| s.to_string()).zip(self.params.iter().copied()).collect(),
            log_likelihood: Some(self.log_likelihood),
            n_params: Some(self.n_params()),
            n_obs: Some(self.n_obs),
            aic: Some(self.aic()),
            bic: Some(self.bic()),
            converged: Some(self.converged),
            plateau: self.plateau(),
        }
    }

    /// Rebuild from the exchange format, re-scoring on `data`.
    pub fn from_json(json: &ModelJson, data: &SurvivalDataset) -> Result<Self> {
        let family = json.family;
        let params = family
            .param_names()
            .iter()
            .map(|name| {
                json.beta.get(*name).copied().ok_or_else(|| Error::InvalidParameters {
                    family: family.name(),
                    message: format!("missing parameter `{name}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = json.beta.keys().find(|k| !family.param_names().contains(&k.as_str())) {
            return Err(Error::InvalidParameters { family: family.name(), message: format!("unknown parameter `{extra}`") });
        }
        let mut model = Self::with_params(family, params, data)?;
        model.converged = json.converged.unwrap_or(true);
        Ok(model)
    }
}

/// `(AIC, BIC) = (-2 ll + 2k, -2 ll + k ln n)`.
pub fn information_criteria(log_likelihood: f64, n_params: usize, n_obs: usize) -> (f64, f64) {
    let k = n_params as f64;
    (-2.0 * log_likelihood + 2.0 * k, -2.0 * log_likelihood + k * (n_obs as f64).ln())
}

/// JSON exchange format: `{family, beta: {name: value}, log_likelihood, aic, bic, ...}`.
///
/// Only `family` and `beta` are required on input.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ModelJson {
    pub family: Family,
    pub beta: BTreeMap<String, f64>,
    #[serde(default)]
    pub log_likelihood: Option<f64>,
    #[serde(default)]
    pub n_params: Option<usize>,
    #[serde(default)]
    pub n_obs: Option<usize>,
    #[serde(default)]
    pub aic: Option<f64>,
    #[serde(default)]
    pub bic: Option<f64>,
    #[serde(default)]
    pub converged: Option<bool>,
    #[serde(default)]
    pub plateau: Option<f64>,
}

impl Serialize for ModelJson {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Beta<'a>(Family, &'a BTreeMap<String, f64>);
        impl Serialize for Beta<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                // family parameter order, not alphabetical
                let mut map = serializer.serialize_map(Some(self.1.len()))?;
                for name in self.0.param_names() {
                    if let Some(v) = self.1.get(*name) {
                        map.serialize_entry(name, v)?;
                    }
                }
                for (k, v) in self.1.iter().filter(|(k, _)| !self.0.param_names().contains(&k.as_str())) {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("family", &self.family)?;
        map.serialize_entry("beta", &Beta(self.family, &self.beta))?;
        let optional: [(&str, Option<serde_json::Value>); 7] = [
            ("log_likelihood", self.log_likelihood.map(Into::into)),
            ("n_params", self.n_params.map(Into::into)),
            ("n_obs", self.n_obs.map(Into::into)),
            ("aic", self.aic.map(Into::into)),
            ("bic", self.bic.map(Into::into)),
            ("converged", self.converged.map(Into::into)),
            ("plateau", self.plateau.map(Into::into)),
        ];
        for (key, value) in optional {
            if let Some(v) = value {
                map.serialize_entry(key, &v)?;
            }
        }
        map.end()
    }
}

/// Right-censored log-likelihood `Σ_events ln f(t) + Σ_censored ln S(t)`.
pub fn log_likelihood(family: Family, params: &[f64], data: &SurvivalDataset) -> f64 {
    data.records()
        .iter()
        .map(|r| if r.event { family.ln_density(params, r.time) } else { family.ln_survival(params, r.time) })
        .sum()
}

fn require_events(data: &SurvivalDataset) -> Result<()> {
    if data.n_events() == 0 {
        Err(Error::NoEvents("maximum likelihood needs at least one observed event"))
    } else {
        Ok(())
    }
}

/// Maximum-likelihood fit. The exponential uses its closed form
/// `λ = E / Σ t`; all other families go through [`fit_numerically`].
pub fn fit(family: Family, data: &SurvivalDataset) -> Result<FittedModel> {
    require_events(data)?;
    match family {
        Family::Exponential => {
            let rate = data.n_events() as f64 / data.total_time();
            FittedModel::with_params(family, vec![rate], data)
        }
        Family::GeneralisedGamma => {
            let nested = [Family::Weibull, Family::Gamma, Family::LogNormal]
                .into_iter()
                .map(|f| fit(f, data))
                .collect::<Result<Vec<_>>>()?;
            let starts: Vec<Vec<f64>> = nested.iter().map(gengamma_equivalent).collect();
            optimize(family, data, &starts)
        }
        _ => fit_numerically(family, data),
    }
}

/// Fit every listed family; failures are returned per family.
pub fn fit_all(families: &[Family], data: &SurvivalDataset) -> Vec<(Family, Result<FittedModel>)> {
    families.iter().map(|&f| (f, fit(f, data))).collect()
}

/// Simplex maximum likelihood from moment-based starting values, for any
/// family (including the exponential, as a cross-check of its closed form).
pub fn fit_numerically(family: Family, data: &SurvivalDataset) -> Result<FittedModel> {
    require_events(data)?;
    let start = initial_values(family, data);
    optimize(family, data, &[start])
}

/// Generalised-gamma parameters reproducing a fitted weibull, gamma or log-normal.
fn gengamma_equivalent(model: &FittedModel) -> Vec<f64> {
    let p = &model.params;
    match model.family {
        Family::Weibull => vec![p[1].ln(), 1.0 / p[0], 1.0],
        Family::Gamma => {
            let q = 1.0 / p[0].sqrt();
            vec![(p[0] / p[1]).ln(), q, q]
        }
        Family::LogNormal => vec![p[0], p[1], 0.0],
        other => unreachable!("no generalised-gamma mapping for {other}"),
    }
}

fn initial_values(family: Family, data: &SurvivalDataset) -> Vec<f64> {
    let rate = data.n_events() as f64 / data.total_time();
    let logs: Vec<f64> = data.event_times().iter().map(|t| t.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64 + (data.len() as f64 / data.n_events() as f64).ln();
    let sd_log = if logs.len() > 1 {
        let m = logs.iter().sum::<f64>() / logs.len() as f64;
        (logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / (logs.len() - 1) as f64).sqrt()
    } else {
        1.0
    };
    let sd_log = if sd_log.is_finite() && sd_log > 1e-3 { sd_log } else { 1.0 };
    match family {
        Family::Exponential => vec![rate],
        Family::Weibull => vec![1.0, 1.0 / rate],
        Family::Gamma => vec![1.0, rate],
        Family::GeneralisedGamma => vec![mean_log, sd_log, 0.5],
        Family::Gompertz => vec![0.0, rate],
        Family::LogLogistic => vec![(std::f64::consts::PI / (sd_log * 3f64.sqrt())).max(0.2), mean_log.exp()],
        Family::LogNormal => vec![mean_log, sd_log],
    }
}

fn to_internal(family: Family, params: &[f64]) -> Vec<f64> {
    params.iter().zip(family.positive_mask()).map(|(p, &pos)| if pos { p.ln() } else { *p }).collect()
}

fn to_natural(family: Family, theta: &[f64]) -> Vec<f64> {
    theta.iter().zip(family.positive_mask()).map(|(t, &pos)| if pos { t.exp() } else { *t }).collect()
}

/// Additive jitter scale for unconstrained parameters with value near zero.
fn free_scale(family: Family, index: usize, data: &SurvivalDataset) -> f64 {
    match (family, index) {
        (Family::Gompertz, 0) => data.n_events() as f64 / data.total_time(),
        _ => 1.0,
    }
}

fn jittered(family: Family, base: &[f64], data: &SurvivalDataset, rng: &mut ChaCha8Rng) -> Vec<f64> {
    base.iter()
        .zip(family.positive_mask())
        .enumerate()
        .map(|(i, (&v, &pos))| {
            let u: f64 = rng.gen_range(-JITTER..=JITTER);
            if pos {
                v * (1.0 + u)
            } else {
                v + u * v.abs().max(free_scale(family, i, data))
            }
        })
        .collect()
}

fn optimize(family: Family, data: &SurvivalDataset, seeds: &[Vec<f64>]) -> Result<FittedModel> {
    let objective = |theta: &[f64]| -> f64 {
        let params = to_natural(family, theta);
        if family.validate(&params).is_err() {
            return f64::INFINITY;
        }
        -log_likelihood(family, &params, data)
    };
    let steps: Vec<f64> = family
        .positive_mask()
        .iter()
        .enumerate()
        .map(|(i, &pos)| if pos { 0.2 } else { 0.2 * free_scale(family, i, data) })
        .collect();
    let opts = NelderMeadOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED ^ family as u64);

    let mut starts: Vec<Vec<f64>> = seeds.to_vec();
    let base = seeds[0].clone();
    while starts.len() < seeds.len() + N_STARTS - 1 {
        starts.push(jittered(family, &base, data, &mut rng));
    }

    let mut best: Option<optim::Minimum> = None;
    for start in &starts {
        let theta0 = to_internal(family, start);
        let m = nelder_mead(objective, &theta0, &steps, opts);
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    // restart from the best vertex with a fresh simplex
    let polished = nelder_mead(objective, &best.x, &steps, opts);
    let best = if polished.value <= best.value { polished } else { best };

    let params = to_natural(family, &best.x);
    family.validate(&params)?;
    Ok(FittedModel { family, log_likelihood: -best.value, params, n_obs: data.len(), converged: best.converged })
}
