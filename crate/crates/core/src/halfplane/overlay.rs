use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::keyed;

/// A directed edge: the bottom vertex's key and the position of the top
/// vertex among its upward neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub bottom_key: u64,
    pub offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlayMode {
    /// Uniform of each edge is a keyed hash of its identity.
    Hashed,
    /// Uniforms drawn from a stream on first query and remembered.
    Stored,
}

/// Bernoulli(p) bond percolation: an edge is open iff its uniform is < p,
/// so overlays sharing a seed are monotonically coupled in p.
#[derive(Debug, Clone)]
pub struct PercolationOverlay {
    p: f64,
    seed: u64,
    mode: OverlayMode,
    stored: RefCell<(ChaCha8Rng, HashMap<DirectedEdge, f64>)>,
}

impl PercolationOverlay {
    pub fn new(p: f64, seed: u64, mode: OverlayMode) -> Self {
        Self {
            p,
            seed,
            mode,
            stored: RefCell::new((ChaCha8Rng::seed_from_u64(seed), HashMap::new())),
        }
    }

    pub fn hashed(p: f64, seed: u64) -> Self {
        Self::new(p, seed, OverlayMode::Hashed)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> OverlayMode {
        self.mode
    }

    /// Same seed and mode, different p.
    pub fn with_p(&self, p: f64) -> Self {
        Self::new(p, self.seed, self.mode)
    }

    pub fn uniform(&self, edge: DirectedEdge) -> f64 {
        match self.mode {
            OverlayMode::Hashed => keyed::unit(keyed::hash3(
                self.seed ^ keyed::TAG_EDGE,
                edge.bottom_key,
                edge.offset as u64,
            )),
            OverlayMode::Stored => {
                let mut st = self.stored.borrow_mut();
                let (rng, table) = &mut *st;
                *table.entry(edge).or_insert_with(|| rng.gen::<f64>())
            }
        }
    }

    pub fn edge_is_open(&self, edge: DirectedEdge) -> bool {
        self.uniform(edge) < self.p
    }

    pub fn is_open(&self, bottom_key: u64, offset: u32) -> bool {
        self.edge_is_open(DirectedEdge { bottom_key, offset })
    }

    /// Number of distinct edges queried so far in Stored mode.
    pub fn stored_len(&self) -> usize {
        self.stored.borrow().1.len()
    }
}
