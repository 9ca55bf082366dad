//! The seven parametric families and their density / survival functions.
//!
//! Parameterizations follow flexsurv:
//! - exponential(rate)
//! - weibull(shape, scale): `S(t) = exp(-(t/scale)^shape)`
//! - gamma(shape, rate)
//! - generalised-gamma(mu, sigma, Q), Prentice's stable form; `Q = 0` is log-normal
//! - gompertz(shape, rate): `H(t) = rate/shape * (exp(shape t) - 1)`; shape may be negative
//! - log-logistic(shape, scale): `S(t) = 1 / (1 + (t/scale)^shape)`
//! - log-normal(meanlog, sdlog)

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_pq, ln_gamma, ln_gamma_p, ln_gamma_q, ln_normal_cdf};

/// Below this |Q| the generalised-gamma survival function uses its
/// log-normal limit (absolute error of order |Q|).
const GENGAMMA_LOGNORMAL_Q: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Exponential,
    Weibull,
    Gamma,
    GeneralisedGamma,
    Gompertz,
    LogLogistic,
    LogNormal,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Exponential,
        Family::Gamma,
        Family::GeneralisedGamma,
        Family::Gompertz,
        Family::LogLogistic,
        Family::LogNormal,
        Family::Weibull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Weibull => "weibull",
            Family::Gamma => "gamma",
            Family::GeneralisedGamma => "generalised-gamma",
            Family::Gompertz => "gompertz",
            Family::LogLogistic => "log-logistic",
            Family::LogNormal => "log-normal",
        }
    }

    pub fn arity(self) -> usize {
        self.param_names().len()
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Exponential => &["rate"],
            Family::Weibull => &["shape", "scale"],
            Family::Gamma => &["shape", "rate"],
            Family::GeneralisedGamma => &["mu", "sigma", "Q"],
            Family::Gompertz => &["shape", "rate"],
            Family::LogLogistic => &["shape", "scale"],
            Family::LogNormal => &["meanlog", "sdlog"],
        }
    }

    /// Which parameters must be strictly positive (fitted on the log scale).
    pub fn positive_mask(self) -> &'static [bool] {
        match self {
            Family::Exponential => &[true],
            Family::Weibull | Family::Gamma | Family::LogLogistic => &[true, true],
            Family::GeneralisedGamma => &[false, true, false],
            Family::Gompertz => &[false, true],
            Family::LogNormal => &[false, true],
        }
    }

    pub fn validate(self, params: &[f64]) -> Result<()> {
        let invalid = |message: String| Error::InvalidParameters { family: self.name(), message };
        if params.len() != self.arity() {
            return Err(invalid(format!("expected {} parameters, got {}", self.arity(), params.len())));
        }
        for ((name, positive), value) in self.param_names().iter().zip(self.positive_mask()).zip(params) {
            if !value.is_finite() {
                return Err(invalid(format!("{name} must be finite, got {value}")));
            }
            if *positive && *value <= 0.0 {
                return Err(invalid(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// `ln S(t)`; parameters are assumed valid.
    pub fn ln_survival(self, params: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Family::Exponential => -params[0] * t,
            Family::Weibull => -(t / params[1]).powf(params[0]),
            Family::Gamma => ln_gamma_q(params[0], params[1] * t),
            Family::GeneralisedGamma => {
                let (mu, sigma, q) = (params[0], params[1], params[2]);
                let w = (t.ln() - mu) / sigma;
                if q.abs() < GENGAMMA_LOGNORMAL_Q {
                    // first-order expansion in Q: S ≈ Φ(-w) - Q (w² + 2) φ(w) / 6
                    let ln_tail = ln_normal_cdf(-w);
                    let ln_phi = -0.5 * w * w - 0.5 * (2.0 * PI).ln();
                    return ln_tail + (-q * (w * w + 2.0) / 6.0 * (ln_phi - ln_tail).exp()).ln_1p();
                }
                let a = 1.0 / (q * q);
                let u = a * (q * w).exp();
                if q > 0.0 {
                    ln_gamma_q(a, u)
                } else {
                    ln_gamma_p(a, u)
                }
            }
            Family::Gompertz => -gompertz_cumhaz(params[0], params[1], t),
            Family::LogLogistic => -softplus(params[0] * (t / params[1]).ln()),
            Family::LogNormal => ln_normal_cdf(-(t.ln() - params[0]) / params[1]),
        }
    }

    /// `ln f(t)` for `t > 0`; parameters are assumed valid.
    pub fn ln_density(self, params: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let lt = t.ln();
        match self {
            Family::Exponential => params[0].ln() - params[0] * t,
            Family::Weibull => {
                let (k, s) = (params[0], params[1]);
                let z = lt - s.ln();
                k.ln() - s.ln() + (k - 1.0) * z - (k * z).exp()
            }
            Family::Gamma => {
                let (a, r) = (params[0], params[1]);
                a * r.ln() + (a - 1.0) * lt - r * t - ln_gamma(a)
            }
            Family::GeneralisedGamma => {
                let (mu, sigma, q) = (params[0], params[1], params[2]);
                let w = (lt - mu) / sigma;
                let base = -(sigma.ln() + lt + 0.5 * (2.0 * PI).ln());
                if q == 0.0 {
                    return base - 0.5 * w * w;
                }
                // |Q| a^a / Γ(a) · exp(a(Qw - e^{Qw})) rewritten so the large-a
                // terms cancel analytically and Q → 0 tends to the log-normal
                let a = 1.0 / (q * q);
                base - expm1_minus_x_over_q2(q, w) - stirling_remainder(a)
            }
            Family::Gompertz => {
                let (shape, rate) = (params[0], params[1]);
                rate.ln() + shape * t - gompertz_cumhaz(shape, rate, t)
            }
            Family::LogLogistic => {
                let (a, s) = (params[0], params[1]);
                let z = a * (lt - s.ln());
                a.ln() - s.ln() + (a - 1.0) * (lt - s.ln()) - 2.0 * softplus(z)
            }
            Family::LogNormal => {
                let (mu, sigma) = (params[0], params[1]);
                let z = (lt - mu) / sigma;
                -(lt + sigma.ln() + 0.5 * (2.0 * PI).ln()) - 0.5 * z * z
            }
        }
    }

    pub fn survival(self, params: &[f64], t: f64) -> f64 {
        match self {
            Family::GeneralisedGamma if params[2].abs() >= GENGAMMA_LOGNORMAL_Q && t > 0.0 => {
                let (mu, sigma, q) = (params[0], params[1], params[2]);
                let w = (t.ln() - mu) / sigma;
                let a = 1.0 / (q * q);
                let (p, upper) = gamma_pq(a, a * (q * w).exp());
                if q > 0.0 {
                    upper
                } else {
                    p
                }
            }
            _ => self.ln_survival(params, t).exp(),
        }
    }

    /// `F(t) = 1 - S(t)`.
    pub fn cdf(self, params: &[f64], t: f64) -> f64 {
        match self {
            Family::GeneralisedGamma => 1.0 - self.survival(params, t),
            _ => -self.ln_survival(params, t).exp_m1(),
        }
    }

    /// Limit of `S(t)` as `t → ∞` when positive (Gompertz with negative shape).
    pub fn plateau(self, params: &[f64]) -> Option<f64> {
        match self {
            Family::Gompertz if params[0] < 0.0 => Some((params[1] / params[0]).exp()),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let family = match key.as_str() {
            "exponential" | "exp" => Family::Exponential,
            "weibull" => Family::Weibull,
            "gamma" => Family::Gamma,
            "generalised-gamma" | "generalized-gamma" | "gengamma" => Family::GeneralisedGamma,
            "gompertz" => Family::Gompertz,
            "log-logistic" | "loglogistic" | "llogis" => Family::LogLogistic,
            "log-normal" | "lognormal" | "lnorm" => Family::LogNormal,
            _ => return Err(Error::UnknownFamily(s.to_string())),
        };
        Ok(family)
    }
}

fn gompertz_cumhaz(shape: f64, rate: f64, t: f64) -> f64 {
    if shape == 0.0 {
        rate * t
    } else {
        rate * (shape * t).exp_m1() / shape
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `(e^x - 1 - x) / Q^2` with `x = Q w`, accurate as `Q → 0`.
fn expm1_minus_x_over_q2(q: f64, w: f64) -> f64 {
    let x = q * w;
    if x.abs() < 1e-2 {
        w * w * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0))))
    } else {
        (x.exp_m1() - x) / (q * q)
    }
}

/// `ln Γ(a) - [(a - ½) ln a - a + ½ ln 2π]`.
fn stirling_remainder(a: f64) -> f64 {
    if a >= 10.0 {
        let inv = 1.0 / a;
        let inv2 = inv * inv;
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
    } else {
        ln_gamma(a) - ((a - 0.5) * a.ln() - a + 0.5 * (2.0 * PI).ln())
    }
}
