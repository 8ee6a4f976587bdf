use std::collections::BTreeMap;
use std::ops::Range;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::BudgetKind;
use crate::keyed;

/// Seed, sample count and worker count of a Monte Carlo run. The worker
/// count never changes results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub master_seed: u64,
    pub n_samples: u64,
    /// None uses every core; Some(1) runs on the calling thread.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(master_seed: u64, n_samples: u64) -> Self {
        Self {
            master_seed,
            n_samples,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum McError {
    #[error("no samples requested")]
    Empty,
    #[error("sample {index}: {kind} budget exceeded")]
    Sample { index: u64, kind: BudgetKind },
    #[error("{0}")]
    Invalid(String),
}

/// Independent stream for one sample: ChaCha8 keyed by the master seed with
/// the sample index as stream number.
pub fn sample_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(master_seed);
    r.set_stream(index);
    r
}

/// Seed for a named sub-experiment, so that sibling runs use disjoint streams.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    keyed::hash2(master_seed, label)
}

/// Evaluates `f` on every index of `range` with its own stream and returns
/// the results in index order.
pub fn run_indexed<T, F>(
    master_seed: u64,
    range: Range<u64>,
    threads: Option<usize>,
    f: F,
) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let work = || {
            range
                .clone()
                .into_par_iter()
                .map(|i| f(i, &mut sample_stream(master_seed, i)))
                .collect::<Vec<T>>()
        };
        match threads {
            Some(1) => run_sequential(master_seed, range.clone(), &f),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .expect("thread pool builds")
                .install(work),
            None => work(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        run_sequential(master_seed, range, &f)
    }
}

/// The single-threaded path, always available.
pub fn run_sequential<T, F>(master_seed: u64, range: Range<u64>, f: &F) -> Vec<T>
where
    F: Fn(u64, &mut ChaCha8Rng) -> T,
{
    range
        .map(|i| f(i, &mut sample_stream(master_seed, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub master_seed: u64,
    /// Seconds; kept out of serialized output so files are reproducible.
    #[serde(skip)]
    pub wall_time: f64,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl EstimateResult {
    /// Sample mean with a 95% normal interval. Sums run in index order.
    pub fn from_values(values: &[f64], master_seed: u64) -> Result<Self, McError> {
        if values.is_empty() {
            return Err(McError::Empty);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self::from_mean_se(
            mean,
            (var / n).sqrt(),
            values.len() as u64,
            master_seed,
        ))
    }

    pub fn from_mean_se(point: f64, stderr: f64, n_samples: u64, master_seed: u64) -> Self {
        Self {
            point,
            ci_low: point - 1.96 * stderr,
            ci_high: point + 1.96 * stderr,
            stderr,
            n_samples,
            master_seed,
            wall_time: 0.0,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.metadata.insert(
            key.to_string(),
            serde_json::to_value(value).expect("metadata serializes"),
        );
        self
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Mean of a per-sample task. Any sample error aborts the estimate and is
/// reported with its index.
pub fn parallel_mc<F>(cfg: &RunConfig, task: F) -> Result<EstimateResult, McError>
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<f64, BudgetKind> + Sync + Send,
{
    if cfg.n_samples == 0 {
        return Err(McError::Empty);
    }
    let start = Instant::now();
    let out = run_indexed(cfg.master_seed, 0..cfg.n_samples, cfg.threads, task);
    let mut values = Vec::with_capacity(out.len());
    for (i, r) in out.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(kind) => {
                return Err(McError::Sample {
                    index: i as u64,
                    kind,
                })
            }
        }
    }
    let mut res = EstimateResult::from_values(&values, cfg.master_seed)?;
    res.wall_time = start.elapsed().as_secs_f64();
    Ok(res)
}
