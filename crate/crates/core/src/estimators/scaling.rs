use rand::Rng;
use serde::{Deserialize, Serialize};

use super::harness::{derive_seed, run_indexed, McError, RunConfig};
use super::stats::{ks_two_sample, KsResult};
use crate::model::{increment_variance, ModelParams};
use crate::peeling::WalkSampler;

/// Walks conditioned on T ≥ scale are followed up to this many multiples of
/// the scale.
pub const CENSOR_FACTOR: u64 = 16;

/// Rescaled functionals of one conditioned walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledSample {
    /// max H over [0, T ∧ 16·scale) divided by sqrt(σ²·scale).
    pub max_height: f64,
    /// H(scale/2) divided by sqrt(σ²·scale).
    pub mid_height: f64,
    /// (T ∧ 16·scale) / scale.
    pub duration: f64,
}

fn conditioned_walk<R: Rng + ?Sized>(
    s: &WalkSampler,
    rng: &mut R,
    scale: u64,
    norm: f64,
) -> Option<ScaledSample> {
    let cap = CENSOR_FACTOR * scale;
    let mid = scale / 2;
    let mut h = 0i64;
    let mut max = 0i64;
    let mut mid_h = 0i64;
    let mut t = cap;
    for n in 1..=cap {
        let next = h + s.step(rng);
        if next < 0 {
            if n < scale {
                return None;
            }
            t = n;
            break;
        }
        h = next;
        max = max.max(h);
        if n == mid {
            mid_h = h;
        }
    }
    Some(ScaledSample {
        max_height: max as f64 / norm,
        mid_height: mid_h as f64 / norm,
        duration: t as f64 / scale as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEnsemble {
    pub scale: u64,
    pub attempts: u64,
    pub samples: Vec<ScaledSample>,
}

impl ScaleEnsemble {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.attempts as f64
    }
}

/// Draws walks until `n_accept` satisfy T ≥ scale. Samples are taken in
/// stream order, so the ensemble does not depend on the worker count.
pub fn conditioned_ensemble(
    params: ModelParams,
    scale: u64,
    n_accept: usize,
    master_seed: u64,
    threads: Option<usize>,
    max_attempts: u64,
) -> Result<ScaleEnsemble, McError> {
    if scale < 2 || n_accept == 0 {
        return Err(McError::Invalid(
            "scale must be at least 2 and n_accept positive".into(),
        ));
    }
    let s = WalkSampler::new(params);
    let norm = (increment_variance(params, 1e-14) * scale as f64).sqrt();
    let mut samples = Vec::with_capacity(n_accept);
    let mut next = 0u64;
    // Start with a batch sized for an acceptance rate of order scale^{-1/2}.
    let mut batch = (n_accept as u64 * (scale as f64).sqrt() as u64).max(1024);
    while samples.len() < n_accept {
        if next >= max_attempts {
            return Err(McError::Sample {
                index: next,
                kind: crate::BudgetKind::Rejections,
            });
        }
        let end = (next + batch).min(max_attempts);
        let got = run_indexed(master_seed, next..end, threads, |_, rng| {
            conditioned_walk(&s, rng, scale, norm)
        });
        for (i, g) in got.into_iter().enumerate() {
            if let Some(x) = g {
                samples.push(x);
                if samples.len() == n_accept {
                    next += i as u64 + 1;
                    return Ok(ScaleEnsemble {
                        scale,
                        attempts: next,
                        samples,
                    });
                }
            }
        }
        next = end;
        let rate = samples.len().max(1) as f64 / next as f64;
        batch = (((n_accept - samples.len()) as f64 / rate) * 1.2) as u64 + 1024;
    }
    Ok(ScaleEnsemble {
        scale,
        attempts: next,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub alpha: f64,
    pub p: f64,
    pub sigma2: f64,
    pub scales: (u64, u64),
    pub acceptance: (f64, f64),
    pub ks_max_height: KsResult,
    pub ks_mid_height: KsResult,
    pub ks_duration: KsResult,
    pub n_conditioned: usize,
    pub master_seed: u64,
}

impl ScalingReport {
    pub fn max_statistic(&self) -> f64 {
        self.ks_max_height
            .statistic
            .max(self.ks_mid_height.statistic)
            .max(self.ks_duration.statistic)
    }
}

/// Compares rescaled functionals of walks conditioned on T ≥ n and on
/// T ≥ factor·n with two-sample KS statistics.
pub fn scaling_selfconsistency(
    params: ModelParams,
    n: u64,
    factor: u64,
    n_conditioned: usize,
    cfg: &RunConfig,
) -> Result<ScalingReport, McError> {
    if factor < 2 {
        return Err(McError::Invalid("factor must be at least 2".into()));
    }
    let max_attempts = u64::MAX / 2;
    let a = conditioned_ensemble(
        params,
        n,
        n_conditioned,
        derive_seed(cfg.master_seed, n),
        cfg.threads,
        max_attempts,
    )?;
    let big = n * factor;
    let b = conditioned_ensemble(
        params,
        big,
        n_conditioned,
        derive_seed(cfg.master_seed, big),
        cfg.threads,
        max_attempts,
    )?;
    let col = |e: &ScaleEnsemble, f: fn(&ScaledSample) -> f64| {
        e.samples.iter().map(f).collect::<Vec<f64>>()
    };
    Ok(ScalingReport {
        alpha: params.alpha(),
        p: params.p(),
        sigma2: increment_variance(params, 1e-14),
        scales: (n, big),
        acceptance: (a.acceptance_rate(), b.acceptance_rate()),
        ks_max_height: ks_two_sample(&col(&a, |s| s.max_height), &col(&b, |s| s.max_height)),
        ks_mid_height: ks_two_sample(&col(&a, |s| s.mid_height), &col(&b, |s| s.mid_height)),
        ks_duration: ks_two_sample(&col(&a, |s| s.duration), &col(&b, |s| s.duration)),
        n_conditioned,
        master_seed: cfg.master_seed,
    })
}
