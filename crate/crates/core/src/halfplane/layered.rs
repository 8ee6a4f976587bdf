//! Explicit layered representation: per-level arrays of child counts with
//! prefix-sum adjacency. Suited to finite windows, snapshots and golden tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyed;
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayeredError {
    #[error("vertex ({level}, {index}) is outside the generated window")]
    OutOfRange { level: usize, index: usize },
    #[error("width budget exceeded at level {level} (needs {needed}, cap {cap})")]
    WidthBudget {
        level: usize,
        needed: usize,
        cap: usize,
    },
    #[error("cyclic level {0} has no vertices above it")]
    EmptyCycle(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredMap {
    levels: Vec<Vec<u32>>,
    #[serde(skip)]
    prefix: Vec<Vec<u64>>,
    cyclic: bool,
    seed: u64,
    alpha: f64,
    width_cap: usize,
}

impl LayeredMap {
    /// Empty half-plane window; counts are keyed by (seed, level, index).
    pub fn half_plane(params: ModelParams, seed: u64) -> Self {
        Self {
            levels: Vec::new(),
            prefix: Vec::new(),
            cyclic: false,
            seed,
            alpha: params.alpha(),
            width_cap: 1 << 26,
        }
    }

    pub fn with_width_cap(mut self, cap: usize) -> Self {
        self.width_cap = cap;
        self
    }

    /// Cyclic map from explicit counts. Level r+1 must have exactly the sum
    /// of level r's counts as width, which is checked only for levels given.
    pub fn cyclic_from_counts(levels: Vec<Vec<u32>>) -> Self {
        let mut m = Self {
            levels,
            prefix: Vec::new(),
            cyclic: true,
            seed: 0,
            alpha: f64::NAN,
            width_cap: usize::MAX,
        };
        m.rebuild_prefix();
        m
    }

    fn rebuild_prefix(&mut self) {
        self.prefix = self
            .levels
            .iter()
            .map(|lvl| {
                let mut acc = 0u64;
                let mut p = Vec::with_capacity(lvl.len() + 1);
                p.push(0);
                for &c in lvl {
                    acc += c as u64;
                    p.push(acc);
                }
                p
            })
            .collect();
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn width(&self, level: usize) -> usize {
        self.levels.get(level).map_or(0, Vec::len)
    }

    pub fn counts(&self, level: usize) -> &[u32] {
        &self.levels[level]
    }

    pub fn child_count(&self, level: usize, i: usize) -> Result<u32, LayeredError> {
        self.levels
            .get(level)
            .and_then(|l| l.get(i).copied())
            .ok_or(LayeredError::OutOfRange { level, index: i })
    }

    /// Number of level-(r+1) vertices with a parent among level r's first `w`.
    fn offspring_span(&self, level: usize, w: usize) -> usize {
        self.prefix[level][w] as usize + 1
    }

    fn count_at(&self, level: usize, i: usize) -> u32 {
        let ln_a = self.alpha.ln();
        keyed::geometric_from_bits(keyed::hash3(self.seed, level as u64, i as u64), ln_a)
    }

    /// Ensures levels 0..=r exist, level 0 has at least `min_width` vertices
    /// and every level is wide enough to hold the offspring of the one below.
    pub fn extend_to_level(&mut self, r: usize, min_width: usize) -> Result<(), LayeredError> {
        assert!(!self.cyclic, "cyclic maps are built whole");
        let mut need = min_width.max(1);
        for level in 0..=r {
            if level == self.levels.len() {
                self.levels.push(Vec::new());
                self.prefix.push(vec![0]);
            }
            if need > self.width_cap {
                return Err(LayeredError::WidthBudget {
                    level,
                    needed: need,
                    cap: self.width_cap,
                });
            }
            while self.levels[level].len() < need {
                let i = self.levels[level].len();
                let c = self.count_at(level, i);
                self.levels[level].push(c);
                let last = *self.prefix[level].last().unwrap();
                self.prefix[level].push(last + c as u64);
            }
            need = self.offspring_span(level, self.levels[level].len());
        }
        Ok(())
    }

    /// Indices s_i, …, s_i + k_i at level+1 (reduced mod the top width when cyclic).
    pub fn upward_neighbors(&self, level: usize, i: usize) -> Result<Vec<usize>, LayeredError> {
        let k = self.child_count(level, i)? as usize;
        let s = self.prefix[level][i] as usize;
        if self.cyclic {
            let top = self.prefix[level][self.levels[level].len()] as usize;
            if top == 0 {
                return Err(LayeredError::EmptyCycle(level));
            }
            Ok((s..=s + k).map(|t| t % top).collect())
        } else {
            let top = self.width(level + 1);
            if s + k >= top {
                return Err(LayeredError::OutOfRange {
                    level: level + 1,
                    index: s + k,
                });
            }
            Ok((s..=s + k).collect())
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let mut m: Self = serde_json::from_str(s)?;
        m.rebuild_prefix();
        Ok(m)
    }
}
