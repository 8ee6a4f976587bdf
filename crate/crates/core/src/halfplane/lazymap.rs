//! Lazily generated map stored as a forest of ascending trees (levels ≥ 0)
//! and descending trees (levels < 0) hanging from the level-0 vertices.
//!
//! Level j+1 is the left-to-right concatenation of the ascending children of
//! level j; level j−1 is the concatenation of the descending children of
//! level j. A vertex's upward neighbours are its children followed by the
//! first child of the next vertex with children. Counts are hashed from
//! vertex keys, so the map is a pure function of its seed no matter which
//! parts get generated first. Absolute horizontal indices never appear,
//! which matters because they grow like m^level.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::keyed;
use crate::model::ModelParams;

pub type VertexId = u32;
const NIL: u32 = u32::MAX;
const ABSENT: u32 = u32::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Half-plane: level-0 vertices 0, 1, 2, … each root independent trees.
    HalfPlane,
    /// Cone: a single root at level 0, every level closed into a cycle.
    Cone,
}

#[derive(Debug, Clone)]
struct Node {
    key: u64,
    level: i32,
    parent: u32,
    /// Index among the parent's children; root index at level 0.
    sib: u32,
    asc_count: u32,
    desc_count: u32,
    asc_first: u32,
    desc_first: u32,
    right_off: u32,
}

#[derive(Debug, Clone)]
pub struct LazyMap {
    topology: Topology,
    alpha: f64,
    ln_alpha: f64,
    ln_beta: f64,
    seed: u64,
    nodes: Vec<Node>,
    roots: Vec<u32>,
    leftmost: HashMap<i32, Option<u32>>,
    max_vertices: usize,
}

impl LazyMap {
    pub fn half_plane(params: ModelParams, seed: u64) -> Self {
        Self::new(params, seed, Topology::HalfPlane)
    }

    /// Cone whose root carries the given key; the whole tree follows from it.
    pub fn cone(params: ModelParams, root_key: u64) -> Self {
        Self::new(params, root_key, Topology::Cone)
    }

    fn new(params: ModelParams, seed: u64, topology: Topology) -> Self {
        let a = params.alpha();
        let mut m = Self {
            topology,
            alpha: a,
            ln_alpha: a.ln(),
            ln_beta: (1.0 - a).ln(),
            seed,
            nodes: Vec::new(),
            roots: Vec::new(),
            leftmost: HashMap::new(),
            max_vertices: usize::MAX,
        };
        if topology == Topology::Cone {
            let id = m.push_node(seed, 0, NIL, 0);
            m.roots.push(id);
        }
        m
    }

    /// Soft cap on generated vertices, checked through [`LazyMap::over_budget`].
    pub fn with_max_vertices(mut self, cap: usize) -> Self {
        self.max_vertices = cap;
        self
    }

    pub fn over_budget(&self) -> bool {
        self.nodes.len() > self.max_vertices
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_generated(&self) -> usize {
        self.nodes.len()
    }

    fn push_node(&mut self, key: u64, level: i32, parent: u32, sib: u32) -> u32 {
        let asc_count = if level >= 0 {
            keyed::asc_count(key, self.ln_alpha)
        } else {
            0
        };
        let desc_count = if level <= 0 && self.topology == Topology::HalfPlane {
            keyed::desc_count(key, self.ln_beta)
        } else {
            0
        };
        let id = self.nodes.len() as u32;
        assert!(id < ABSENT, "vertex arena exhausted");
        self.nodes.push(Node {
            key,
            level,
            parent,
            sib,
            asc_count,
            desc_count,
            asc_first: NIL,
            desc_first: NIL,
            right_off: NIL,
        });
        id
    }

    pub fn key(&self, v: VertexId) -> u64 {
        self.nodes[v as usize].key
    }

    pub fn level(&self, v: VertexId) -> i32 {
        self.nodes[v as usize].level
    }

    /// Number of ascending children (tree edges going up).
    pub fn asc_count(&self, v: VertexId) -> u32 {
        self.nodes[v as usize].asc_count
    }

    /// Number of descending children (half-plane, levels ≤ 0).
    pub fn desc_count(&self, v: VertexId) -> u32 {
        self.nodes[v as usize].desc_count
    }

    /// Tree parent: ascending parent above level 0, descending parent below.
    pub fn tree_parent(&self, v: VertexId) -> Option<VertexId> {
        let p = self.nodes[v as usize].parent;
        (p != NIL).then_some(p)
    }

    pub fn sibling_index(&self, v: VertexId) -> u32 {
        self.nodes[v as usize].sib
    }

    pub fn root(&mut self, i: u32) -> VertexId {
        match self.topology {
            Topology::Cone => {
                assert_eq!(i, 0, "a cone has a single root");
                self.roots[0]
            }
            Topology::HalfPlane => {
                while self.roots.len() <= i as usize {
                    let idx = self.roots.len() as u32;
                    let key = keyed::hash3(self.seed, keyed::TAG_ROOT, idx as u64);
                    let id = self.push_node(key, 0, NIL, idx);
                    self.roots.push(id);
                }
                self.roots[i as usize]
            }
        }
    }

    pub fn asc_child(&mut self, v: VertexId, i: u32) -> VertexId {
        let n = &self.nodes[v as usize];
        debug_assert!(n.level >= 0 && i < n.asc_count);
        if n.asc_first == NIL {
            let (key, level, k) = (n.key, n.level, n.asc_count);
            let first = self.nodes.len() as u32;
            for c in 0..k {
                self.push_node(keyed::asc_child_key(key, c), level + 1, v, c);
            }
            self.nodes[v as usize].asc_first = first;
        }
        self.nodes[v as usize].asc_first + i
    }

    pub fn desc_child(&mut self, v: VertexId, i: u32) -> VertexId {
        let n = &self.nodes[v as usize];
        debug_assert!(n.level <= 0 && i < n.desc_count);
        if n.desc_first == NIL {
            let (key, level, d) = (n.key, n.level, n.desc_count);
            let first = self.nodes.len() as u32;
            for c in 0..d {
                self.push_node(keyed::desc_child_key(key, c), level - 1, v, c);
            }
            self.nodes[v as usize].desc_first = first;
        }
        self.nodes[v as usize].desc_first + i
    }

    /// Right neighbour on the same level (cyclic in a cone).
    pub fn next(&mut self, v: VertexId) -> Option<VertexId> {
        let n = &self.nodes[v as usize];
        let (level, parent, sib) = (n.level, n.parent, n.sib);
        if level == 0 {
            return Some(match self.topology {
                Topology::Cone => v,
                Topology::HalfPlane => self.root(sib + 1),
            });
        }
        if level > 0 {
            if sib + 1 < self.nodes[parent as usize].asc_count {
                return Some(v + 1);
            }
            let q = self.next_nonempty_asc(parent)?;
            Some(self.asc_child(q, 0))
        } else {
            if sib + 1 < self.nodes[parent as usize].desc_count {
                return Some(v + 1);
            }
            let q = self.next_nonempty_desc(parent)?;
            Some(self.desc_child(q, 0))
        }
    }

    /// Left neighbour on the same level; None at the half-plane's left edge.
    pub fn prev(&mut self, v: VertexId) -> Option<VertexId> {
        let n = &self.nodes[v as usize];
        let (level, parent, sib) = (n.level, n.parent, n.sib);
        if level == 0 {
            return match self.topology {
                Topology::Cone => Some(v),
                Topology::HalfPlane => (sib > 0).then(|| self.roots[sib as usize - 1]),
            };
        }
        if sib > 0 {
            return Some(v - 1);
        }
        if level > 0 {
            let q = self.prev_nonempty_asc(parent)?;
            let k = self.nodes[q as usize].asc_count;
            Some(self.asc_child(q, k - 1))
        } else {
            let q = self.prev_nonempty_desc(parent)?;
            let d = self.nodes[q as usize].desc_count;
            Some(self.desc_child(q, d - 1))
        }
    }

    /// First vertex strictly after `v` (cyclically, possibly `v` itself in a
    /// cone) that has ascending children.
    pub fn next_nonempty_asc(&mut self, v: VertexId) -> Option<VertexId> {
        let mut w = self.next(v)?;
        loop {
            if self.nodes[w as usize].asc_count > 0 {
                return Some(w);
            }
            if w == v {
                return None;
            }
            w = self.next(w)?;
        }
    }

    pub fn prev_nonempty_asc(&mut self, v: VertexId) -> Option<VertexId> {
        let mut w = self.prev(v)?;
        loop {
            if self.nodes[w as usize].asc_count > 0 {
                return Some(w);
            }
            if w == v {
                return None;
            }
            w = self.prev(w)?;
        }
    }

    fn next_nonempty_desc(&mut self, v: VertexId) -> Option<VertexId> {
        let mut w = self.next(v)?;
        while self.nodes[w as usize].desc_count == 0 {
            w = self.next(w)?;
        }
        Some(w)
    }

    fn prev_nonempty_desc(&mut self, v: VertexId) -> Option<VertexId> {
        let mut w = self.prev(v)?;
        while self.nodes[w as usize].desc_count == 0 {
            w = self.prev(w)?;
        }
        Some(w)
    }

    /// The shared last upward neighbour of a vertex at level ≥ 0.
    pub fn rightmost_offspring(&mut self, v: VertexId) -> Option<VertexId> {
        let memo = self.nodes[v as usize].right_off;
        if memo == ABSENT {
            return None;
        }
        if memo != NIL {
            return Some(memo);
        }
        let r = self.next_nonempty_asc(v).map(|q| self.asc_child(q, 0));
        self.nodes[v as usize].right_off = r.unwrap_or(ABSENT);
        r
    }

    /// Number of directed edges leaving `v` upwards.
    pub fn up_degree(&mut self, v: VertexId) -> u32 {
        if self.level(v) >= 0 {
            let k = self.asc_count(v);
            k + u32::from(self.rightmost_offspring(v).is_some())
        } else {
            let mut buf = Vec::new();
            self.up_neighbors(v, &mut buf);
            buf.len() as u32
        }
    }

    /// The `o`-th upward neighbour, counting from the left.
    pub fn up_neighbor(&mut self, v: VertexId, o: u32) -> Option<VertexId> {
        if self.level(v) >= 0 {
            let k = self.asc_count(v);
            if o < k {
                Some(self.asc_child(v, o))
            } else if o == k {
                self.rightmost_offspring(v)
            } else {
                None
            }
        } else {
            let mut buf = Vec::new();
            self.up_neighbors(v, &mut buf);
            buf.get(o as usize).copied()
        }
    }

    /// Upward neighbours left to right; the last one is shared with the next
    /// vertex (for levels ≥ 0, every entry but the last is a tree child).
    pub fn up_neighbors(&mut self, v: VertexId, out: &mut Vec<VertexId>) {
        out.clear();
        if self.level(v) >= 0 {
            let k = self.asc_count(v);
            for i in 0..k {
                out.push(self.asc_child(v, i));
            }
            if let Some(r) = self.rightmost_offspring(v) {
                out.push(r);
            }
            return;
        }
        let t = self.nodes[v as usize].parent;
        if self.nodes[v as usize].sib == 0 {
            // Leftmost descending child: it is also the rightmost parent of
            // the run of childless vertices to the left of t, plus one more.
            let mut cur = self.prev(t);
            while let Some(u) = cur {
                out.push(u);
                if self.nodes[u as usize].desc_count > 0 {
                    break;
                }
                cur = self.prev(u);
            }
            out.reverse();
        }
        out.push(t);
    }

    /// Position of `u` among the upward neighbours of `b`.
    pub fn up_offset(&mut self, b: VertexId, u: VertexId) -> Option<u32> {
        if self.level(u) != self.level(b) + 1 {
            return None;
        }
        if self.level(b) >= 0 {
            if self.nodes[u as usize].parent == b {
                return Some(self.nodes[u as usize].sib);
            }
            if self.rightmost_offspring(b) == Some(u) {
                return Some(self.asc_count(b));
            }
            None
        } else {
            let mut buf = Vec::new();
            self.up_neighbors(b, &mut buf);
            buf.iter().position(|&w| w == u).map(|i| i as u32)
        }
    }

    /// Rightmost parent of `u` (None at level 0 of a cone).
    pub fn rho(&mut self, u: VertexId) -> Option<VertexId> {
        let level = self.level(u);
        if level >= 1 {
            return Some(self.nodes[u as usize].parent);
        }
        if self.topology == Topology::Cone {
            return None;
        }
        let q = self.next_nonempty_desc(u)?;
        Some(self.desc_child(q, 0))
    }

    /// Leftmost parent of `u`.
    pub fn lambda(&mut self, u: VertexId) -> Option<VertexId> {
        if self.topology == Topology::Cone && self.level(u) == 0 {
            return None;
        }
        match self.prev(u) {
            Some(w) => self.rho(w),
            None => self.leftmost(self.level(u) - 1),
        }
    }

    /// All parents of `u`, left to right (each once).
    pub fn parents(&mut self, u: VertexId, out: &mut Vec<VertexId>) {
        out.clear();
        let Some(r) = self.rho(u) else { return };
        let single_vertex_level = self.topology == Topology::Cone && self.prev(u) == Some(u);
        if single_vertex_level {
            // Every vertex below points at u.
            let mut w = self.next(r).expect("cone levels are cyclic");
            loop {
                out.push(w);
                if w == r {
                    break;
                }
                w = self.next(w).expect("cone levels are cyclic");
            }
            return;
        }
        let mut w = self.lambda(u).expect("non-root vertices have parents");
        loop {
            out.push(w);
            if w == r {
                break;
            }
            w = self.next(w).expect("parents form a contiguous run");
        }
    }

    /// Leftmost vertex of a level (start of the cut in a cone).
    pub fn leftmost(&mut self, level: i32) -> Option<VertexId> {
        if let Some(&v) = self.leftmost.get(&level) {
            return v;
        }
        let v = if level == 0 {
            Some(self.root(0))
        } else if level > 0 {
            self.leftmost(level - 1).and_then(|below| {
                if self.asc_count(below) > 0 {
                    Some(self.asc_child(below, 0))
                } else {
                    match self.topology {
                        Topology::HalfPlane => self.rightmost_offspring(below),
                        Topology::Cone => {
                            // Scan the cycle from the cut for a vertex with children.
                            let mut w = below;
                            loop {
                                w = self.next(w)?;
                                if w == below {
                                    break None;
                                }
                                if self.asc_count(w) > 0 {
                                    break Some(self.asc_child(w, 0));
                                }
                            }
                        }
                    }
                }
            })
        } else {
            assert_eq!(self.topology, Topology::HalfPlane);
            let mut w = self
                .leftmost(level + 1)
                .expect("half-plane levels are infinite");
            while self.desc_count(w) == 0 {
                w = self.next(w).expect("half-plane levels are infinite");
            }
            Some(self.desc_child(w, 0))
        };
        self.leftmost.insert(level, v);
        v
    }

    /// Address of `v`: root index, then sibling indices down the tree path.
    pub fn path(&self, v: VertexId) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.level(v).unsigned_abs() as usize + 1);
        let mut w = v;
        loop {
            let n = &self.nodes[w as usize];
            out.push(n.sib);
            if n.parent == NIL {
                break;
            }
            w = n.parent;
        }
        out.reverse();
        out
    }

    /// Ancestor of `v` at level `target` along tree parents (towards level 0).
    pub fn tree_ancestor(&self, v: VertexId, target: i32) -> VertexId {
        let mut w = v;
        while self.level(w) != target {
            w = self.nodes[w as usize].parent;
            assert_ne!(w, NIL, "target level is not between v and level 0");
        }
        w
    }

    /// Left-to-right order of two vertices on the same level (in a cone,
    /// relative to the cut through the leftmost ray).
    pub fn cmp_same_level(&self, u: VertexId, v: VertexId) -> Ordering {
        debug_assert_eq!(self.level(u), self.level(v));
        if u == v {
            return Ordering::Equal;
        }
        // Climb both to their lowest common ancestor's children.
        let (mut a, mut b) = (u, v);
        loop {
            let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
            if na.parent == nb.parent {
                return na.sib.cmp(&nb.sib);
            }
            a = na.parent;
            b = nb.parent;
        }
    }

    /// Sort key giving the canonical (level, left-to-right) order.
    pub fn canonical_key(&self, v: VertexId) -> (i32, Vec<u32>) {
        (self.level(v), self.path(v))
    }

    /// Every generated vertex with its tree data, for snapshots.
    pub fn snapshot(&self) -> MapSnapshot {
        MapSnapshot {
            topology: self.topology,
            alpha: self.alpha,
            seed: self.seed,
            vertices: self
                .nodes
                .iter()
                .map(|n| SnapshotVertex {
                    key: n.key,
                    level: n.level,
                    parent: (n.parent != NIL).then_some(n.parent),
                    sib: n.sib,
                    asc_count: n.asc_count,
                    desc_count: n.desc_count,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotVertex {
    pub key: u64,
    pub level: i32,
    pub parent: Option<u32>,
    pub sib: u32,
    pub asc_count: u32,
    pub desc_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub topology: Topology,
    pub alpha: f64,
    pub seed: u64,
    pub vertices: Vec<SnapshotVertex>,
}
