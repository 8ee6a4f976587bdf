use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::harness::{run_indexed, EstimateResult, McError, RunConfig};
use super::stats::{chi_square_gof, ChiSquareResult};
use crate::error::BudgetKind;
use crate::halfplane::{LazyMap, PercolationOverlay};
use crate::model::{increment_pmf, ModelParams};
use crate::peeling::{
    explore_cluster, explore_cluster_partial, hausdorff_gap, Budgets, ExplorationTrace,
    HausdorffGap,
};

/// Fresh half-plane and overlay for one sample, keyed from its stream.
pub fn fresh_map<R: Rng + ?Sized>(
    params: ModelParams,
    rng: &mut R,
) -> (LazyMap, PercolationOverlay) {
    let map_seed: u64 = rng.gen();
    let overlay_seed: u64 = rng.gen();
    (
        LazyMap::half_plane(params, map_seed),
        PercolationOverlay::hashed(params.p(), overlay_seed),
    )
}

/// Explores the cluster of the origin on a fresh map. Returns the trace and,
/// when a budget stopped it, which one.
pub fn coupled_run(
    params: ModelParams,
    rng: &mut ChaCha8Rng,
    budgets: Budgets,
) -> (ExplorationTrace, Option<BudgetKind>, LazyMap) {
    let (mut map, ov) = fresh_map(params, rng);
    let start = map.root(0);
    match explore_cluster(&mut map, &ov, start, budgets) {
        Ok(tr) => (tr, None, map),
        Err(e) => (e.partial, Some(e.kind), map),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RunSummary {
    /// Cluster size; None when the skeleton cap was hit first.
    size: Option<u64>,
    steps: u64,
    theta_sum: u64,
    skeleton: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSizeSample {
    pub alpha: f64,
    pub p: f64,
    /// Sizes of finished clusters, with +∞ for runs whose skeleton reached
    /// the cap (those clusters have at least `skeleton_cap` vertices).
    pub sizes: Vec<f64>,
    pub skeleton_cap: usize,
    pub censored: u64,
    /// Σθ / ΣT over finished runs: the mean number of cluster vertices
    /// revealed per exploration step.
    pub kappa: EstimateResult,
}

/// |C̃| samples from coupled explorations. Survival P(|C̃| ≥ n) is exact
/// for n ≤ `skeleton_cap`.
pub fn cluster_size_sample(
    params: ModelParams,
    skeleton_cap: usize,
    cfg: &RunConfig,
) -> Result<ClusterSizeSample, McError> {
    if cfg.n_samples == 0 {
        return Err(McError::Empty);
    }
    let budgets = Budgets {
        max_steps: u64::MAX,
        max_level: i64::MAX,
        max_vertices: 200_000_000,
        max_skeleton: Some(skeleton_cap),
    };
    let out = run_indexed(cfg.master_seed, 0..cfg.n_samples, cfg.threads, |_, rng| {
        let (tr, stop, _) = coupled_run(params, rng, budgets);
        match stop {
            None => Ok(RunSummary {
                size: Some(tr.cluster_size() as u64),
                steps: tr.steps.len() as u64,
                theta_sum: tr.steps.iter().map(|s| s.theta).sum(),
                skeleton: tr.skeleton.len() as u64,
            }),
            Some(BudgetKind::Skeleton) => Ok(RunSummary {
                size: None,
                steps: tr.steps.len() as u64,
                theta_sum: 0,
                skeleton: tr.skeleton.len() as u64,
            }),
            Some(kind) => Err(kind),
        }
    });
    let mut sizes = Vec::with_capacity(out.len());
    let mut censored = 0;
    let (mut th, mut st) = (0u64, 0u64);
    let mut ratios = Vec::new();
    for (i, r) in out.into_iter().enumerate() {
        let r = r.map_err(|kind| McError::Sample {
            index: i as u64,
            kind,
        })?;
        match r.size {
            Some(s) => {
                sizes.push(s as f64);
                th += r.theta_sum;
                st += r.steps;
                ratios.push((r.theta_sum as f64, r.steps as f64));
            }
            None => {
                sizes.push(f64::INFINITY);
                censored += 1;
            }
        }
    }
    let kappa = ratio_estimate(&ratios, th as f64, st as f64, cfg.master_seed);
    Ok(ClusterSizeSample {
        alpha: params.alpha(),
        p: params.p(),
        sizes,
        skeleton_cap,
        censored,
        kappa,
    })
}

/// Ratio-of-sums estimate with the usual linearized standard error.
fn ratio_estimate(pairs: &[(f64, f64)], num: f64, den: f64, seed: u64) -> EstimateResult {
    let n = pairs.len() as f64;
    if pairs.is_empty() || den == 0.0 {
        return EstimateResult::from_mean_se(f64::NAN, f64::NAN, pairs.len() as u64, seed);
    }
    let r = num / den;
    let mean_den = den / n;
    let var = pairs.iter().map(|(a, b)| (a - r * b).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    EstimateResult::from_mean_se(r, (var / n).sqrt() / mean_den, pairs.len() as u64, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementHistogram {
    /// Bin labels: 1, 0, −1, …, −k and finally "≤ −(k+1)".
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    pub probs: Vec<f64>,
    pub total_steps: u64,
    pub runs: u64,
    pub chi_square: ChiSquareResult,
}

/// Pools the increments of coupled explorations, each capped at `step_cap`
/// steps, until `target_steps` have been seen, and tests the histogram
/// against the exact increment law.
pub fn coupled_increment_histogram(
    params: ModelParams,
    target_steps: u64,
    step_cap: u64,
    cfg: &RunConfig,
) -> Result<IncrementHistogram, McError> {
    if target_steps == 0 || step_cap == 0 {
        return Err(McError::Empty);
    }
    let budgets = Budgets {
        max_steps: step_cap,
        ..Budgets::default()
    };
    let mut raw: Vec<u64> = Vec::new();
    let mut total = 0u64;
    let mut runs = 0u64;
    let batch = 256u64;
    while total < target_steps {
        let out = run_indexed(
            cfg.master_seed,
            runs..runs + batch,
            cfg.threads,
            |_, rng| {
                let (tr, stop, _) = coupled_run(params, rng, budgets);
                match stop {
                    None | Some(BudgetKind::Steps) => Ok(tr
                        .steps
                        .iter()
                        .map(|s| s.kind.increment())
                        .collect::<Vec<i64>>()),
                    Some(kind) => Err(kind),
                }
            },
        );
        for (i, r) in out.into_iter().enumerate() {
            let inc = r.map_err(|kind| McError::Sample {
                index: runs + i as u64,
                kind,
            })?;
            for d in inc {
                let b = (1 - d) as usize;
                if raw.len() <= b {
                    raw.resize(b + 1, 0);
                }
                raw[b] += 1;
                total += 1;
            }
            if total >= target_steps {
                runs += i as u64 + 1;
                return Ok(histogram_test(params, &raw, total, runs));
            }
        }
        runs += batch;
    }
    Ok(histogram_test(params, &raw, total, runs))
}

/// Bins increments so every bin expects at least 5 counts and runs the
/// Pearson test. `raw[b]` counts increment 1 − b.
pub fn histogram_test(
    params: ModelParams,
    raw: &[u64],
    total: u64,
    runs: u64,
) -> IncrementHistogram {
    let n = total as f64;
    let pmf = |b: usize| increment_pmf(params, 1 - b as i64).expect("increment ≤ 1");
    let mut probs = Vec::new();
    let mut counts = Vec::new();
    let mut labels = Vec::new();
    let mut acc = 0.0;
    let mut b = 0;
    loop {
        let p = pmf(b);
        let rest = 1.0 - acc - p;
        if rest * n < 5.0 || p * n < 5.0 {
            break;
        }
        probs.push(p);
        counts.push(raw.get(b).copied().unwrap_or(0));
        labels.push((1 - b as i64).to_string());
        acc += p;
        b += 1;
    }
    probs.push(1.0 - acc);
    counts.push(raw.iter().skip(b).sum());
    labels.push(format!("<={}", 1 - b as i64));
    let chi_square = chi_square_gof(&counts, &probs);
    IncrementHistogram {
        labels,
        counts,
        probs,
        total_steps: total,
        runs,
        chi_square,
    }
}

/// Hausdorff gap of each of `cfg.n_samples` coupled runs, with the budget
/// that stopped the run if any. A stopped run is measured on the part of the
/// cluster found inside the regions swept before the stop.
pub fn hausdorff_survey(
    params: ModelParams,
    budgets: Budgets,
    cfg: &RunConfig,
) -> Vec<(HausdorffGap, Option<BudgetKind>)> {
    run_indexed(cfg.master_seed, 0..cfg.n_samples, cfg.threads, |_, rng| {
        let (mut map, ov) = fresh_map(params, rng);
        let start = map.root(0);
        let (tr, stop) = explore_cluster_partial(&mut map, &ov, start, budgets);
        (hausdorff_gap(&tr, &mut map), stop)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::compute_pc;

    fn critical(alpha: f64) -> ModelParams {
        let b = ModelParams::new(alpha, 0.5).unwrap();
        b.with_p(compute_pc(b, 1e-14)).unwrap()
    }

    #[test]
    fn cluster_sizes_match_theta_identity() {
        let params = ModelParams::new(2.0 / 3.0, 0.3).unwrap();
        let s = cluster_size_sample(params, 5000, &RunConfig::new(3, 300)).unwrap();
        assert_eq!(s.censored, 0);
        assert!(s.sizes.iter().all(|&x| x >= 1.0));
        assert!(s.kappa.point > 0.0);
    }

    #[test]
    fn histogram_bins_cover_everything() {
        let params = critical(2.0 / 3.0);
        let h = coupled_increment_histogram(params, 20_000, 500, &RunConfig::new(9, 0)).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), h.total_steps);
        assert!(h.total_steps >= 20_000);
        assert!((h.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(h.chi_square.p_value > 1e-4, "{h:?}");
    }

    #[test]
    fn survey_checks_finished_and_stopped_runs() {
        let params = critical(0.75);
        let budgets = Budgets {
            max_steps: 2000,
            ..Budgets::default()
        };
        let g = hausdorff_survey(params, budgets, &RunConfig::new(4, 50));
        assert_eq!(g.len(), 50);
        assert!(g.iter().all(|(x, _)| x.within_bound()));
        assert!(g.iter().filter(|(_, stop)| stop.is_none()).count() > 20);
    }
}
