//! Special functions: log-gamma, regularized incomplete gamma, normal CDF.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 100_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x >= 10.0 {
        // Stirling series, truncation error below 2e-14 at x = 10
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series = inv
            * (1.0 / 12.0
                - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
        return (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series;
    }
    if x < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ln(x^a e^{-x} / Γ(a))`, the common prefactor of the series and fraction.
fn ln_prefactor(a: f64, x: f64) -> f64 {
    a * x.ln() - x - ln_gamma(a)
}

/// Series for P(a, x) without the prefactor; converges for x < a + 1.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction for Q(a, x) without the prefactor (modified Lentz);
/// converges for x >= a + 1.
fn upper_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized lower and upper incomplete gamma `(P(a, x), Q(a, x))`.
///
/// Requires `a > 0` and `x >= 0`; returns NaNs otherwise.
pub fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if !(a > 0.0) || !(x >= 0.0) {
        return (f64::NAN, f64::NAN);
    }
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let pre = ln_prefactor(a, x);
    if x < a + 1.0 {
        let p = (pre + lower_series(a, x).ln()).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let q = (pre + upper_fraction(a, x).ln()).exp().min(1.0);
        (1.0 - q, q)
    }
}

pub fn gamma_p(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).0
}

pub fn gamma_q(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).1
}

/// `ln Q(a, x)`, finite far into the upper tail where Q underflows.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x >= a + 1.0 && x.is_finite() {
        ln_prefactor(a, x) + upper_fraction(a, x).ln()
    } else {
        gamma_q(a, x).ln()
    }
}

/// `ln P(a, x)`, finite far into the lower tail.
pub fn ln_gamma_p(a: f64, x: f64) -> f64 {
    if x > 0.0 && x < a + 1.0 {
        ln_prefactor(a, x) + lower_series(a, x).ln()
    } else {
        gamma_p(a, x).ln()
    }
}

/// Standard normal CDF, via `erfc(y) = Q(1/2, y^2)`.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let half_q = 0.5 * gamma_q(0.5, 0.5 * z * z);
    if z < 0.0 {
        half_q
    } else {
        1.0 - half_q
    }
}

/// `ln Φ(z)`, accurate in the far lower tail.
pub fn ln_normal_cdf(z: f64) -> f64 {
    if z < -1.0 {
        0.5f64.ln() + ln_gamma_q(0.5, 0.5 * z * z)
    } else {
        // Φ(z) >= 0.158 here, a plain log is accurate
        normal_cdf(z).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert_relative_eq!(ln_gamma(n as f64), fact.ln(), max_relative = 1e-14, epsilon = 1e-14);
            fact *= n as f64;
        }
        assert_relative_eq!(ln_gamma(0.5), PI.sqrt().ln(), epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(0.1), 2.252_712_651_734_206, epsilon = 1e-13);
    }

    #[test]
    fn ln_gamma_matches_statrs() {
        for &x in &[0.01, 0.3, 0.99, 1.7, 4.2, 9.99, 10.0, 10.01, 55.5, 1000.0, 1e5] {
            assert_relative_eq!(ln_gamma(x), statrs::function::gamma::ln_gamma(x), max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_q_exponential_case() {
        for &x in &[0.0, 0.1, 1.0, 3.0, 20.0, 200.0] {
            assert_relative_eq!(gamma_q(1.0, x), (-x).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn gamma_pq_matches_statrs() {
        for &a in &[0.5, 1.3, 5.0, 40.0, 250.0] {
            for &x in &[0.01, 0.5, 1.0, 4.0, 30.0, 260.0] {
                let (p, q) = gamma_pq(a, x);
                assert_relative_eq!(p + q, 1.0, epsilon = 1e-14);
                let sp = statrs::function::gamma::gamma_lr(a, x);
                assert!((p - sp).abs() < 1e-10, "a={a} x={x} p={p} statrs={sp}");
            }
        }
    }

    #[test]
    fn log_tails_stay_finite() {
        let lq = ln_gamma_q(0.5, 2000.0);
        assert!(lq.is_finite() && lq < -1990.0);
        assert_relative_eq!(ln_gamma_q(2.0, 5.0), gamma_q(2.0, 5.0).ln(), max_relative = 1e-13);
        assert_relative_eq!(ln_gamma_p(2.0, 0.5), gamma_p(2.0, 0.5).ln(), max_relative = 1e-13);
    }

    #[test]
    fn normal_cdf_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-14);
        assert_relative_eq!(normal_cdf(-1.0), 0.158_655_253_931_457_05, max_relative = 1e-13);
        assert_relative_eq!(normal_cdf(-10.0), 7.619_853_024_160_47e-24, max_relative = 1e-11);
        assert_relative_eq!(ln_normal_cdf(-40.0), -804.608_442_013_753_9, max_relative = 1e-12);
        assert_relative_eq!(ln_normal_cdf(0.3), normal_cdf(0.3).ln(), max_relative = 1e-14);
    }
}
