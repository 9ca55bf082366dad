//! Exact discrete null distributions and their p-values.
//!
//! Interval event counts are binomial under the fitted model; counts pooled
//! over several sub-intervals are a sum of independent binomials, obtained
//! here by dense convolution. Tail terms below [`TRIM`] are not stored, which
//! keeps convolutions over hundreds of sub-intervals cheap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_q, ln_gamma};

/// PMF entries below this are dropped from the stored support.
pub const TRIM: f64 = 1e-32;

/// Renormalize only when the total mass drifts further than this.
const RENORM_TOL: f64 = 1e-12;

/// Probability mass function on `0..=n_total`, stored as a dense window
/// `[offset, offset + pmf.len())`; entries outside the window are below [`TRIM`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    n_total: u64,
    offset: usize,
    pmf: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn point_mass(at: u64) -> Self {
        Self { n_total: at, offset: at as usize, pmf: vec![1.0] }
    }

    /// Upper end of the support.
    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    /// `P(X = k)`.
    pub fn prob(&self, k: u64) -> f64 {
        let k = k as usize;
        if k < self.offset {
            return 0.0;
        }
        self.pmf.get(k - self.offset).copied().unwrap_or(0.0)
    }

    /// `P(X < k)`.
    pub fn prob_below(&self, k: u64) -> f64 {
        let k = k as usize;
        if k <= self.offset {
            return 0.0;
        }
        let end = (k - self.offset).min(self.pmf.len());
        self.pmf[..end].iter().sum()
    }

    /// `P(X > k)`.
    pub fn prob_above(&self, k: u64) -> f64 {
        let k = k as usize;
        let start = if k < self.offset { 0 } else { (k + 1 - self.offset).min(self.pmf.len()) };
        self.pmf[start..].iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| (self.offset + i) as f64 * p).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }

    /// Full PMF over `0..=n_total`, zero-filled outside the stored window.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_total as usize + 1];
        out[self.offset..self.offset + self.pmf.len()].copy_from_slice(&self.pmf);
        out
    }

    fn trimmed(n_total: u64, offset: usize, mut pmf: Vec<f64>) -> Self {
        let first = pmf.iter().position(|&p| p >= TRIM).unwrap_or(0);
        let last = pmf.iter().rposition(|&p| p >= TRIM).unwrap_or(0);
        pmf.truncate(last + 1);
        pmf.drain(..first);
        let mut dist = Self { n_total, offset: offset + first, pmf };
        dist.renormalize();
        dist
    }

    fn renormalize(&mut self) {
        let total = self.total_mass();
        if (total - 1.0).abs() > RENORM_TOL && total > 0.0 {
            self.pmf.iter_mut().for_each(|p| *p /= total);
        }
    }

    /// Distribution of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &Self) -> Self {
        if other.pmf.len() == 1 && other.pmf[0] == 1.0 {
            let mut out = self.clone();
            out.offset += other.offset;
            out.n_total += other.n_total;
            return out;
        }
        let mut out = vec![0.0; self.pmf.len() + other.pmf.len() - 1];
        for (i, a) in self.pmf.iter().enumerate() {
            for (j, b) in other.pmf.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::trimmed(self.n_total + other.n_total, self.offset + other.offset, out)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Binomial(n, p) PMF.
///
/// The mode term is computed in log space; neighbours follow from the
/// ratio recurrence until they fall below [`TRIM`].
pub fn binomial_pmf(n: u64, p: f64) -> Result<DiscreteDistribution> {
    check_probability(p)?;
    if n == 0 || p == 0.0 {
        return Ok(DiscreteDistribution { n_total: n, offset: 0, pmf: vec![1.0] });
    }
    if p == 1.0 {
        return Ok(DiscreteDistribution { n_total: n, offset: n as usize, pmf: vec![1.0] });
    }
    let nf = n as f64;
    let mode = (((nf + 1.0) * p).floor() as u64).min(n);
    let mf = mode as f64;
    let ln_mode = ln_gamma(nf + 1.0) - ln_gamma(mf + 1.0) - ln_gamma(nf - mf + 1.0)
        + mf * p.ln()
        + (nf - mf) * (-p).ln_1p();
    let odds = p / (1.0 - p);

    let mut below = Vec::new();
    let mut term = ln_mode.exp();
    let mut k = mode;
    while k > 0 {
        term *= k as f64 / ((nf - k as f64 + 1.0) * odds);
        if term < TRIM {
            break;
        }
        below.push(term);
        k -= 1;
    }
    let start = mode as usize - below.len();
    below.reverse();
    let mut pmf = below;
    let mut term = ln_mode.exp();
    pmf.push(term);
    let mut k = mode;
    while k < n {
        term *= (nf - k as f64) / (k as f64 + 1.0) * odds;
        if term < TRIM {
            break;
        }
        pmf.push(term);
        k += 1;
    }
    Ok(DiscreteDistribution::trimmed(n, start, pmf))
}

/// Distribution of a sum of independent binomials `Σ Binomial(n_i, p_i)`.
pub fn sum_of_binomials_pmf(terms: &[(u64, f64)]) -> Result<DiscreteDistribution> {
    let mut acc = DiscreteDistribution::point_mass(0);
    for &(n, p) in terms {
        check_probability(p)?;
        if n == 0 {
            continue;
        }
        if p == 0.0 {
            acc.n_total += n;
            continue;
        }
        acc = acc.convolve(&binomial_pmf(n, p)?);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PValueKind {
    Midpoint,
    Randomized { u: f64 },
}

/// Lower-tail discrete p-value: small when fewer events than expected were
/// observed, large when more were.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub value: f64,
    pub kind: PValueKind,
    pub observed: u64,
    /// `P(X < observed)`
    pub below: f64,
    /// `P(X = observed)`
    pub at: f64,
}

fn tail_parts(dist: &DiscreteDistribution, k: u64) -> Result<(f64, f64)> {
    if k > dist.n_total {
        return Err(Error::OutsideSupport { observed: k, max: dist.n_total });
    }
    Ok((dist.prob_below(k), dist.prob(k)))
}

/// `P(X < k) + ½·P(X = k)`.
pub fn midpoint_pvalue(dist: &DiscreteDistribution, k: u64) -> Result<PValue> {
    let (below, at) = tail_parts(dist, k)?;
    Ok(PValue { value: (below + 0.5 * at).clamp(0.0, 1.0), kind: PValueKind::Midpoint, observed: k, below, at })
}

/// `P(X < k) + u·P(X = k)`; exactly uniform under the null when `u ~ U[0, 1]`.
pub fn randomized_pvalue(dist: &DiscreteDistribution, k: u64, u: f64) -> Result<PValue> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidInput(format!("uniform draw must lie in [0, 1], got {u}")));
    }
    let (below, at) = tail_parts(dist, k)?;
    Ok(PValue {
        value: (below + u * at).clamp(0.0, 1.0),
        kind: PValueKind::Randomized { u },
        observed: k,
        below,
        at,
    })
}

/// Upper tail of the chi-square distribution, `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    assert!(df >= 1, "chi-square needs at least one degree of freedom");
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}
