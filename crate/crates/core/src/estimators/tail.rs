use serde::{Deserialize, Serialize};

use super::harness::McError;
use super::stats::{linear_fit, survival_at};

/// Minimum sample count accepted by the tail fits.
pub const MIN_TAIL_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Slope of log P(X ≥ n) against log n (power-law fit) or against n
    /// (exponential fit).
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub fit_range: (f64, f64),
    pub r_squared: f64,
    /// The (n, P(X ≥ n)) points used.
    pub points: Vec<(f64, f64)>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailAxis {
    /// log P against log n.
    LogLog,
    /// log P against n.
    SemiLog,
}

/// `k` thresholds spaced geometrically from `lo` to `hi`, rounded to integers
/// and deduplicated.
pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    assert!(lo >= 1.0 && hi > lo && k >= 2);
    let mut out: Vec<f64> = (0..k)
        .map(|i| (lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).round())
        .collect();
    out.dedup();
    out
}

/// `k` evenly spaced integer thresholds from `lo` to `hi`.
pub fn lin_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    assert!(hi > lo && k >= 2);
    let mut out: Vec<f64> = (0..k)
        .map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).round())
        .collect();
    out.dedup();
    out
}

/// Least-squares fit of the empirical survival function at `thresholds`.
pub fn fit_tail(samples: &[f64], thresholds: &[f64], axis: TailAxis) -> Result<TailFit, McError> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(McError::Invalid(format!(
            "tail fit needs at least {MIN_TAIL_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let surv = survival_at(&sorted, thresholds);
    let points: Vec<(f64, f64)> = thresholds.iter().copied().zip(surv).collect();
    fit_survival_points(&points, axis, samples.len())
}

/// Fit on precomputed survival points (n, P(X ≥ n)).
pub fn fit_survival_points(
    points: &[(f64, f64)],
    axis: TailAxis,
    n_samples: usize,
) -> Result<TailFit, McError> {
    if points.len() < 5 {
        return Err(McError::Invalid(format!(
            "tail fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, _)) = points.iter().find(|(_, s)| *s <= 0.0) {
        return Err(McError::Invalid(format!(
            "no samples reach n = {n}; shrink the fit range"
        )));
    }
    let xs: Vec<f64> = points
        .iter()
        .map(|&(n, _)| match axis {
            TailAxis::LogLog => n.ln(),
            TailAxis::SemiLog => n,
        })
        .collect();
    let ys: Vec<f64> = points.iter().map(|&(_, s)| s.ln()).collect();
    let f = linear_fit(&xs, &ys);
    Ok(TailFit {
        exponent: f.slope,
        stderr: f.slope_stderr,
        intercept: f.intercept,
        fit_range: (points[0].0, points[points.len() - 1].0),
        r_squared: f.r_squared,
        points: points.to_vec(),
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fixture() {
        // x_i = (N/i)² has P(X ≥ 4^k) = 2^{-k} exactly when N = 2^20.
        let n = 1u64 << 20;
        let samples: Vec<f64> = (1..=n).map(|i| (n as f64 / i as f64).powi(2)).collect();
        let t = log_spaced(1.0, 4f64.powi(10), 11);
        assert_eq!(t.len(), 11);
        let f = fit_tail(&samples, &t, TailAxis::LogLog).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12, "{}", f.exponent);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_fixture_is_semilog_linear() {
        // Deterministic quantiles of a geometric law.
        let n = 100_000;
        let q: f64 = 0.9;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (u.ln() / q.ln()).floor()
            })
            .collect();
        let f = fit_tail(&samples, &lin_spaced(1.0, 40.0, 10), TailAxis::SemiLog).unwrap();
        assert!((f.exponent - q.ln()).abs() < 1e-3);
        assert!(f.r_squared > 0.9999);
    }

    #[test]
    fn too_few_samples_or_points() {
        assert!(fit_tail(&[1.0; 10], &[1.0, 2.0, 3.0, 4.0, 5.0], TailAxis::LogLog).is_err());
        let s = vec![1.0; MIN_TAIL_SAMPLES];
        assert!(fit_tail(&s, &[1.0, 2.0], TailAxis::LogLog).is_err());
        assert!(fit_tail(&s, &[1.0, 2.0, 3.0, 4.0, 5.0], TailAxis::LogLog).is_err());
    }
}
