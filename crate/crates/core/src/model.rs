//! Exact analytic quantities of the model: critical point, drift, the
//! descending-height law and the wide-tree probability.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// The pair (α, p). α is the probability that a triangle of a strip is
/// top-oriented, p the probability that a directed edge is open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    p: f64,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: f64,
    p: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ParamError;
    fn try_from(raw: RawParams) -> Result<Self, ParamError> {
        ModelParams::new(raw.alpha, raw.p)
    }
}

impl ModelParams {
    pub fn new(alpha: f64, p: f64) -> Result<Self, ParamError> {
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(ParamError::Alpha(alpha));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(ParamError::P(p));
        }
        Ok(Self { alpha, p })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Mean of the geometric law μ_α, m = α/(1−α) > 1.
    pub fn m(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }

    pub fn with_p(&self, p: f64) -> Result<Self, ParamError> {
        Self::new(self.alpha, p)
    }
}

/// μ_β(k) = β^k (1−β).
pub fn geometric_pmf(beta: f64, k: u32) -> f64 {
    beta.powi(k as i32) * (1.0 - beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants {
    pub eta: f64,
    pub p_c: f64,
    pub drift: f64,
    pub sigma2: f64,
    pub series_truncation_error: f64,
}

impl AnalyticConstants {
    pub fn compute(params: ModelParams, tol: f64) -> Self {
        let (eta, err) = eta_with_error(params, tol);
        let p_c = eta / (1.0 + eta);
        let drift = params.p - (1.0 - params.p) * eta;
        Self {
            eta,
            p_c,
            drift,
            sigma2: increment_variance(params, tol),
            series_truncation_error: err,
        }
    }
}

/// Returns (η, bound on the neglected tail).
fn eta_with_error(params: ModelParams, tol: f64) -> (f64, f64) {
    assert!(tol > 0.0, "tol must be positive");
    let m = params.m();
    let cut = tol * (m - 1.0) / (m + 1.0);
    let mut sum = 0.0;
    let mut mpow = m;
    let mut term = 1.0;
    while term >= cut {
        sum += term;
        mpow *= m;
        term = (m - 1.0) / (mpow - 1.0);
    }
    // Consecutive terms shrink by at least a factor m.
    let tail = term * m / (m - 1.0) / (m + 1.0);
    (sum / (m + 1.0), tail)
}

/// η = (1/(m+1)) Σ_{n≥0} (m−1)/(m^{n+1}−1).
pub fn compute_eta(params: ModelParams, tol: f64) -> f64 {
    eta_with_error(params, tol).0
}

pub fn compute_pc(params: ModelParams, tol: f64) -> f64 {
    let eta = compute_eta(params, tol);
    eta / (1.0 + eta)
}

/// Mean increment of the height walk, p − (1−p)η.
pub fn compute_drift(params: ModelParams, tol: f64) -> f64 {
    params.p - (1.0 - params.p) * compute_eta(params, tol)
}

/// P(h(t↓) ≥ n) = (m−1)/(m^{n+1}−1) for a GW_{1−α} tree.
pub fn descending_height_tail(params: ModelParams, n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let m = params.m();
    let denom = m.powi(n as i32 + 1) - 1.0;
    if denom.is_infinite() {
        0.0
    } else {
        (m - 1.0) / denom
    }
}

/// P(h(t↓) = n).
pub fn descending_height_pmf(params: ModelParams, n: u32) -> f64 {
    descending_height_tail(params, n) - descending_height_tail(params, n + 1)
}

/// Same tail computed through u_{k+1} = φ(u_k), φ(z) = α/(1−(1−α)z).
pub fn descending_height_tail_by_recurrence(params: ModelParams, n: u32) -> f64 {
    let a = params.alpha;
    let mut u = 0.0;
    for _ in 0..n {
        u = a / (1.0 - (1.0 - a) * u);
    }
    1.0 - u
}

/// Extinction probability of GW_α, the sub-unit fixed point 1/m.
pub fn extinction_probability(params: ModelParams) -> f64 {
    1.0 / params.m()
}

/// Mean offspring of the pruned process (X−1)⁺ with X ~ μ_α.
pub fn pruned_mean(params: ModelParams) -> f64 {
    params.m() - params.alpha
}

/// Survival probability of the pruned process, computed by functional
/// iteration of its generating function g(s) = (1−α) + α(1−α)/(1−αs) from 0.
pub fn wide_probability(params: ModelParams, tol: f64) -> f64 {
    assert!(tol > 0.0, "tol must be positive");
    if pruned_mean(params) <= 1.0 {
        return 0.0;
    }
    let a = params.alpha;
    let g = |s: f64| (1.0 - a) + a * (1.0 - a) / (1.0 - a * s);
    let mut q = 0.0;
    loop {
        let next = g(q);
        if (next - q).abs() < tol {
            return 1.0 - next;
        }
        q = next;
    }
}

/// Expected number of candidates tested by the wide-vertex search, 1/P(wide).
pub fn expected_wide_rounds(params: ModelParams, tol: f64) -> f64 {
    let w = wide_probability(params, tol);
    if w > 0.0 {
        1.0 / w
    } else {
        f64::INFINITY
    }
}

/// Law of one increment of the height walk.
pub fn increment_pmf(params: ModelParams, h: i64) -> Result<f64, ParamError> {
    let (a, p) = (params.alpha, params.p);
    match h {
        1 => Ok(p),
        0 => Ok(a * (1.0 - p)),
        h if h < 0 => Ok((1.0 - a) * (1.0 - p) * descending_height_pmf(params, (-h - 1) as u32)),
        h => Err(ParamError::Increment(h)),
    }
}

/// Returns (E[1+H], E[(1+H)²]) for H the descending height.
fn descending_moments(params: ModelParams, tol: f64) -> (f64, f64) {
    let m = params.m();
    let mut first = 0.0;
    let mut second = 0.0;
    let mut n = 0u32;
    loop {
        let t = descending_height_tail(params, n);
        first += t;
        second += (2 * n + 1) as f64 * t;
        // Remaining terms are bounded by a geometric series of ratio 1/m with a
        // linear prefactor; stop once that bound is below tol.
        let rest = t / (m - 1.0) * (2 * n + 3) as f64 * m / (m - 1.0);
        if rest < tol || t == 0.0 {
            break;
        }
        n += 1;
    }
    (first, second)
}

/// Var[h(V₁)] at the stored p.
pub fn increment_variance(params: ModelParams, tol: f64) -> f64 {
    let (mean, second) = increment_moments(params, tol);
    (second - mean * mean).max(0.0)
}

/// (E[Δ], E[Δ²]) of one increment by series summation.
pub fn increment_moments(params: ModelParams, tol: f64) -> (f64, f64) {
    let (a, p) = (params.alpha, params.p);
    let (first, second) = descending_moments(params, tol);
    let w = (1.0 - a) * (1.0 - p);
    (p - w * first, p + w * second)
}

/// Largest θ with E[e^{−θΔ}] ≤ 1 for a walk with positive drift, so that the
/// probability of ever going negative from height x is at most e^{−θ(x+1)}.
/// Returns None when the drift is not positive.
pub fn lundberg_exponent(params: ModelParams, tol: f64) -> Option<f64> {
    let drift = compute_drift(params, tol);
    if drift <= 0.0 {
        return None;
    }
    let (a, p) = (params.alpha, params.p);
    let m = params.m();
    let mgf = |theta: f64| -> f64 {
        // E[e^{θ(1+H)}] = Σ_n e^{θ(n+1)} P(H=n), converging for e^θ < m.
        let mut s = 0.0;
        let mut n = 0u32;
        loop {
            let pm = descending_height_pmf(params, n);
            let term = (theta * (n + 1) as f64).exp() * pm;
            s += term;
            if (term < 1e-18 && n > 10) || n > 100_000 {
                break;
            }
            n += 1;
        }
        p * (-theta).exp() + a * (1.0 - p) + (1.0 - a) * (1.0 - p) * s
    };
    let mut lo = 0.0;
    let mut hi = m.ln() * (1.0 - 1e-9);
    if mgf(hi) <= 1.0 {
        return Some(hi);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mgf(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, p: f64) -> ModelParams {
        ModelParams::new(alpha, p).unwrap()
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(ModelParams::new(0.5, 0.3).is_err());
        assert!(ModelParams::new(1.0, 0.3).is_err());
        assert!(ModelParams::new(0.7, -0.1).is_err());
        assert!(ModelParams::new(0.7, 1.1).is_err());
        assert!(ModelParams::new(0.7, 0.0).is_ok());
        assert!(ModelParams::new(0.7, 1.0).is_ok());
        assert!(ModelParams::new(f64::NAN, 0.3).is_err());
    }

    #[test]
    fn height_tail_examples() {
        let q = params(2.0 / 3.0, 0.5);
        assert_eq!(descending_height_tail(q, 0), 1.0);
        assert!((descending_height_tail(q, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((descending_height_pmf(q, 1) - 4.0 / 21.0).abs() < 1e-15);
        assert!((descending_height_tail_by_recurrence(q, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((descending_height_tail_by_recurrence(q, 3) - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn increment_pmf_examples() {
        let q = params(2.0 / 3.0, 0.5);
        assert!((increment_pmf(q, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((increment_pmf(q, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((increment_pmf(q, -1).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!(increment_pmf(q, 2).is_err());
    }

    #[test]
    fn drift_examples() {
        let q = params(2.0 / 3.0, 0.0);
        let eta = compute_eta(q, 1e-14);
        assert!((compute_drift(q, 1e-14) + eta).abs() < 1e-15);
        let q = params(2.0 / 3.0, 0.6);
        assert!((compute_drift(q, 1e-14) - 0.3857740).abs() < 1e-7);
    }

    #[test]
    fn variance_at_zero_and_one() {
        assert!(increment_variance(params(2.0 / 3.0, 1.0), 1e-14).abs() < 1e-15);
        let q = params(0.7, 0.0);
        let (mean, _) = increment_moments(q, 1e-14);
        assert!((mean + compute_eta(q, 1e-14)).abs() < 1e-12);
    }

    #[test]
    fn wide_probability_regimes() {
        assert!((wide_probability(params(2.0 / 3.0, 0.5), 1e-15) - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(wide_probability(params(0.6, 0.5), 1e-12), 0.0);
    }

    #[test]
    fn lundberg_exponent_bounds_the_mgf() {
        let q = params(2.0 / 3.0, 0.6);
        let th = lundberg_exponent(q, 1e-14).unwrap();
        assert!(th > 0.0 && th < q.m().ln());
        assert!(lundberg_exponent(params(2.0 / 3.0, 0.3), 1e-14).is_none());
    }
}
