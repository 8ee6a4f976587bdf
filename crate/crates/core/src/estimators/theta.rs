use rand::Rng;
use serde::{Deserialize, Serialize};

use super::harness::{run_indexed, EstimateResult, McError, RunConfig};
use crate::model::{compute_drift, compute_pc, lundberg_exponent, ModelParams};
use crate::peeling::WalkSampler;

const TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptions {
    /// Walks still nonnegative after this many steps count as surviving.
    pub horizon: u64,
    /// Supercritical walks reaching the height where the chance of ever
    /// returning to 0 is below this bound are stopped and counted as
    /// surviving. None disables early stopping.
    pub absorb_eps: Option<f64>,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            absorb_eps: Some(1e-6),
        }
    }
}

/// Height at which a walk with positive drift is stopped, from the
/// exponential bound P(ever ≤ 0 from x) ≤ e^{−θx}.
pub fn absorption_height(params: ModelParams, eps: f64) -> Option<i64> {
    let theta = lundberg_exponent(params, TOL)?;
    if theta <= 0.0 {
        return None;
    }
    Some(((1.0 / eps).ln() / theta).ceil().max(1.0) as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct WalkOutcome {
    alive_at_horizon: bool,
    alive_at_double: bool,
    /// T′ ≤ horizon and H(T′) = 0.
    zero_return: bool,
    /// T′ > horizon (or the walk was absorbed first).
    t_prime_beyond: bool,
    steps: u64,
}

fn run_walk<R: Rng + ?Sized>(
    s: &WalkSampler,
    rng: &mut R,
    horizon: u64,
    absorb: Option<i64>,
) -> WalkOutcome {
    let mut h = 0i64;
    let mut t_prime = None;
    let mut out = WalkOutcome::default();
    for n in 1..=2 * horizon {
        h += s.step(rng);
        if t_prime.is_none() && h <= 0 {
            t_prime = Some(n);
            if n <= horizon && h == 0 {
                out.zero_return = true;
            }
        }
        if h < 0 {
            out.alive_at_horizon = n > horizon;
            out.t_prime_beyond = t_prime.is_some_and(|t| t > horizon);
            out.steps = n;
            return out;
        }
        if absorb.is_some_and(|m| h >= m) {
            out.alive_at_horizon = true;
            out.alive_at_double = true;
            out.t_prime_beyond = t_prime.is_none_or(|t| t > horizon);
            out.steps = n;
            return out;
        }
    }
    out.alive_at_horizon = true;
    out.alive_at_double = true;
    out.t_prime_beyond = t_prime.is_none_or(|t| t > horizon);
    out.steps = 2 * horizon;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub alpha: f64,
    pub p: f64,
    pub p_c: f64,
    pub drift: f64,
    /// Fraction of walks with T > horizon.
    pub direct: EstimateResult,
    /// Same walks judged at twice the horizon.
    pub direct_double_horizon: EstimateResult,
    /// Θ̂(2h) − Θ̂(h), an estimate of the truncation bias.
    pub horizon_gap: f64,
    /// Fraction with T′ > horizon, to compare with the drift.
    pub t_prime_escape: EstimateResult,
    /// Fraction with T′ ≤ horizon and H(T′) = 0.
    pub zero_return: EstimateResult,
    /// drift / (1 − r̂), defined above criticality.
    pub decomposition: Option<EstimateResult>,
    pub absorb_height: Option<i64>,
    pub horizon: u64,
    pub total_steps: u64,
}

impl ThetaEstimate {
    /// Whether the two channels agree within their joint 95% interval.
    pub fn channels_agree(&self) -> Option<bool> {
        let d = self.decomposition.as_ref()?;
        let se = (self.direct.stderr.powi(2) + d.stderr.powi(2)).sqrt();
        Some((self.direct.point - d.point).abs() <= 1.96 * se.max(1e-12))
    }
}

fn proportion(hits: u64, n: u64, seed: u64) -> EstimateResult {
    let q = hits as f64 / n as f64;
    let se = (q * (1.0 - q) / n as f64).sqrt();
    EstimateResult::from_mean_se(q, se, n, seed)
}

/// Estimates Θ̃(p) = P(T = ∞) from direct walks, together with the
/// decomposition drift / (1 − P(T′ < ∞, H(T′) = 0)).
pub fn estimate_theta_walk(
    params: ModelParams,
    opts: ThetaOptions,
    cfg: &RunConfig,
) -> Result<ThetaEstimate, McError> {
    if cfg.n_samples == 0 {
        return Err(McError::Empty);
    }
    if opts.horizon == 0 {
        return Err(McError::Invalid("horizon must be positive".into()));
    }
    let start = std::time::Instant::now();
    let p_c = compute_pc(params, TOL);
    let drift = compute_drift(params, TOL);
    let absorb = match opts.absorb_eps {
        Some(eps) if params.p() > p_c => absorption_height(params, eps),
        _ => None,
    };
    let sampler = WalkSampler::new(params);
    let outcomes = run_indexed(cfg.master_seed, 0..cfg.n_samples, cfg.threads, |_, rng| {
        run_walk(&sampler, rng, opts.horizon, absorb)
    });
    let n = cfg.n_samples;
    let count = |f: fn(&WalkOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let total_steps = outcomes.iter().map(|o| o.steps).sum();
    let wall = start.elapsed().as_secs_f64();

    let mut direct = proportion(count(|o| o.alive_at_horizon), n, cfg.master_seed)
        .with_meta("channel", "direct")
        .with_meta("horizon", opts.horizon)
        .with_meta("absorb_height", absorb);
    direct.wall_time = wall;
    let double = proportion(count(|o| o.alive_at_double), n, cfg.master_seed)
        .with_meta("horizon", 2 * opts.horizon);
    let escape = proportion(count(|o| o.t_prime_beyond), n, cfg.master_seed);
    let zero = proportion(count(|o| o.zero_return), n, cfg.master_seed);
    let decomposition = (drift > 0.0 && zero.point < 1.0).then(|| {
        let q = 1.0 - zero.point;
        EstimateResult::from_mean_se(drift / q, drift * zero.stderr / (q * q), n, cfg.master_seed)
            .with_meta("channel", "decomposition")
    });
    Ok(ThetaEstimate {
        alpha: params.alpha(),
        p: params.p(),
        p_c,
        drift,
        horizon_gap: double.point - direct.point,
        direct,
        direct_double_horizon: double,
        t_prime_escape: escape,
        zero_return: zero,
        decomposition,
        absorb_height: absorb,
        horizon: opts.horizon,
        total_steps,
    })
}

/// Hitting times T of direct walks, with +∞ for walks still nonnegative
/// after `cap` steps.
pub fn hitting_time_sample(
    params: ModelParams,
    cap: u64,
    cfg: &RunConfig,
) -> Result<Vec<f64>, McError> {
    if cfg.n_samples == 0 {
        return Err(McError::Empty);
    }
    let s = WalkSampler::new(params);
    Ok(run_indexed(
        cfg.master_seed,
        0..cfg.n_samples,
        cfg.threads,
        |_, rng| {
            let mut h = 0i64;
            for n in 1..=cap {
                h += s.step(rng);
                if h < 0 {
                    return n as f64;
                }
            }
            f64::INFINITY
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub p: f64,
    pub dp: f64,
    pub theta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Θ̂ / (p − p_c), reported only above p_c.
    pub ratio: Option<f64>,
    pub decomposition: Option<f64>,
}

/// Θ̂ on a grid of offsets from p_c. All grid points reuse the same sample
/// streams, so the walks are coupled and the estimate is monotone in p.
pub fn near_critical_theta_scan(
    alpha: f64,
    dps: &[f64],
    opts: ThetaOptions,
    cfg: &RunConfig,
) -> Result<Vec<ScanRow>, McError> {
    let base = ModelParams::new(alpha, 0.5).map_err(|e| McError::Invalid(e.to_string()))?;
    let p_c = compute_pc(base, TOL);
    let mut rows = Vec::with_capacity(dps.len());
    for &dp in dps {
        let params = base
            .with_p(p_c + dp)
            .map_err(|e| McError::Invalid(e.to_string()))?;
        let est = estimate_theta_walk(params, opts, cfg)?;
        rows.push(ScanRow {
            p: params.p(),
            dp,
            theta: est.direct.point,
            ci_low: est.direct.ci_low,
            ci_high: est.direct.ci_high,
            ratio: (dp > 0.0).then(|| est.direct.point / dp),
            decomposition: est.decomposition.as_ref().map(|d| d.point),
        });
    }
    Ok(rows)
}

/// Ratio max/min of Θ̂/(p − p_c) over the rows above p_c.
pub fn ratio_spread(rows: &[ScanRow]) -> Option<f64> {
    let r: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    if r.is_empty() {
        return None;
    }
    let max = r.iter().cloned().fold(f64::MIN, f64::max);
    let min = r.iter().cloned().fold(f64::MAX, f64::min);
    Some(max / min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: u64) -> RunConfig {
        RunConfig::new(11, n)
    }

    #[test]
    fn all_open_walk_survives() {
        let params = ModelParams::new(0.6, 1.0).unwrap();
        let e = estimate_theta_walk(
            params,
            ThetaOptions {
                horizon: 50,
                absorb_eps: None,
            },
            &cfg(200),
        )
        .unwrap();
        assert_eq!(e.direct.point, 1.0);
        assert_eq!(e.direct.ci_low, 1.0);
        assert_eq!(e.zero_return.point, 0.0);
    }

    #[test]
    fn subcritical_walks_die() {
        let params = ModelParams::new(2.0 / 3.0, 0.2).unwrap();
        let e = estimate_theta_walk(
            params,
            ThetaOptions {
                horizon: 10_000,
                absorb_eps: Some(1e-6),
            },
            &cfg(2000),
        )
        .unwrap();
        assert_eq!(e.direct.point, 0.0);
        assert!(e.absorb_height.is_none() && e.decomposition.is_none());
    }

    #[test]
    fn skip_free_escape_matches_drift_and_channels_agree() {
        let params = ModelParams::new(2.0 / 3.0, 0.6).unwrap();
        let e = estimate_theta_walk(params, ThetaOptions::default(), &cfg(40_000)).unwrap();
        let d = e.drift;
        assert!(
            (e.t_prime_escape.point - d).abs() < 4.0 * e.t_prime_escape.stderr,
            "{} vs {d}",
            e.t_prime_escape.point
        );
        assert_eq!(e.channels_agree(), Some(true), "{e:?}");
        assert!(e.horizon_gap.abs() < 1e-3);
    }

    #[test]
    fn absorption_does_not_bias() {
        let params = ModelParams::new(0.75, 0.5).unwrap();
        let c = cfg(20_000);
        let with = estimate_theta_walk(
            params,
            ThetaOptions {
                horizon: 20_000,
                absorb_eps: Some(1e-9),
            },
            &c,
        )
        .unwrap();
        let without = estimate_theta_walk(
            params,
            ThetaOptions {
                horizon: 20_000,
                absorb_eps: None,
            },
            &c,
        )
        .unwrap();
        // Shared streams: the two runs can only differ on walks that reached
        // the absorption height and later died.
        assert!((with.direct.point - without.direct.point).abs() <= 2.0 / 20_000.0);
        assert!(with.total_steps < without.total_steps);
    }

    #[test]
    fn hitting_times_match_first_step() {
        // T = 1 exactly when the first increment is negative.
        let params = ModelParams::new(2.0 / 3.0, 0.4).unwrap();
        let t = hitting_time_sample(params, 100, &cfg(50_000)).unwrap();
        let ones = t.iter().filter(|&&x| x == 1.0).count() as f64 / t.len() as f64;
        let q = (1.0 - params.alpha()) * (1.0 - params.p());
        assert!((ones - q).abs() < 4.0 * (q * (1.0 - q) / t.len() as f64).sqrt());
    }

    #[test]
    fn scan_is_monotone_in_p() {
        let rows = near_critical_theta_scan(
            2.0 / 3.0,
            &[-0.05, 0.0, 0.05, 0.1, 0.2],
            ThetaOptions {
                horizon: 5000,
                absorb_eps: Some(1e-6),
            },
            &cfg(3000),
        )
        .unwrap();
        for w in rows.windows(2) {
            assert!(w[0].theta <= w[1].theta, "{rows:?}");
        }
        assert!(rows[0].ratio.is_none() && rows[3].ratio.is_some());
    }
}
