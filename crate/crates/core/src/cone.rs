//! The cone model: a causal triangulation grown from a supercritical tree
//! conditioned to survive, percolation of the root cluster, the wide-vertex
//! search and the counter of disjoint surviving clusters.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::BudgetKind;
use crate::gw::{count_at_depth, survives_to, wide_check, KeyedGwTree, Offspring, WideStatus};
use crate::halfplane::{
    bfs_cluster, reaches_level, ClusterStats, LayeredMap, LazyMap, PercolationOverlay, Probe,
    VertexId,
};
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("search passed the cone depth {0}")]
    DepthExceeded(u32),
    #[error("{0} budget exceeded")]
    Budget(BudgetKind),
    #[error("wide vertices do not exist at this alpha (pruned mean {0} ≤ 1)")]
    NotWide(f64),
}

#[derive(Debug, Clone)]
pub struct ConeMap {
    map: LazyMap,
    params: ModelParams,
    depth: u32,
    root_key: u64,
    attempts: u32,
}

/// Samples a cone whose tree survives to `depth` by rejection over root keys
/// drawn from `rng`.
pub fn build_cone<R: Rng + ?Sized>(
    params: ModelParams,
    depth: u32,
    rng: &mut R,
    max_rejections: u32,
) -> Result<ConeMap, ConeError> {
    assert!(depth >= 1, "depth must be at least 1");
    let mut src = KeyedGwTree::new(params, Offspring::Alpha);
    for attempt in 1..=max_rejections.max(1) {
        let key = rng.gen::<u64>();
        if survives_to(&mut src, key, depth) {
            return Ok(ConeMap {
                map: LazyMap::cone(params, key),
                params,
                depth,
                root_key: key,
                attempts: attempt,
            });
        }
    }
    Err(ConeError::Budget(BudgetKind::Rejections))
}

impl ConeMap {
    pub fn map(&self) -> &LazyMap {
        &self.map
    }

    pub fn map_mut(&mut self) -> &mut LazyMap {
        &mut self.map
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root_key(&self) -> u64 {
        self.root_key
    }

    /// Root keys drawn before acceptance.
    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    pub fn root(&mut self) -> VertexId {
        self.map.root(0)
    }

    /// Vertices of a level in cyclic order from the cut, or None when the
    /// level is empty or wider than `cap`.
    pub fn level_vertices(&mut self, level: u32, cap: usize) -> Option<Vec<VertexId>> {
        let start = self.map.leftmost(level as i32)?;
        let mut out = vec![start];
        let mut v = self.map.next(start)?;
        while v != start {
            if out.len() >= cap {
                return None;
            }
            out.push(v);
            v = self.map.next(v)?;
        }
        Some(out)
    }

    pub fn level_width(&mut self, level: u32, cap: usize) -> Option<usize> {
        self.level_vertices(level, cap).map(|v| v.len())
    }

    /// Explicit cyclic snapshot of levels 0..=depth.
    pub fn to_layered(&mut self, depth: u32, width_cap: usize) -> Option<LayeredMap> {
        let mut levels = Vec::new();
        for level in 0..=depth {
            let vs = self.level_vertices(level, width_cap)?;
            levels.push(vs.iter().map(|&v| self.map.asc_count(v)).collect());
        }
        Some(LayeredMap::cyclic_from_counts(levels))
    }

    /// True when every directed edge into `u` is closed.
    pub fn disconnected_from_parents(&mut self, overlay: &PercolationOverlay, u: VertexId) -> bool {
        let mut parents = Vec::new();
        let mut ups = Vec::new();
        self.map.parents(u, &mut parents);
        for &b in &parents {
            self.map.up_neighbors(b, &mut ups);
            let key = self.map.key(b);
            for (o, &w) in ups.iter().enumerate() {
                if w == u && overlay.is_open(key, o as u32) {
                    return false;
                }
            }
        }
        true
    }
}

/// Directed cluster of the root, by BFS up to `level_cap`.
pub fn root_cluster(
    cone: &mut ConeMap,
    overlay: &PercolationOverlay,
    level_cap: u32,
    vertex_budget: usize,
) -> Result<ClusterStats, ConeError> {
    let root = cone.root();
    bfs_cluster(
        &mut cone.map,
        overlay,
        root,
        level_cap as i32,
        vertex_budget,
    )
    .map_err(|e| ConeError::Budget(e.kind))
}

/// Whether the root cluster reaches `level`, by depth-first probe.
pub fn root_survives(cone: &mut ConeMap, overlay: &PercolationOverlay, level: u32) -> Probe {
    let root = cone.root();
    reaches_level(&mut cone.map, overlay, root, level as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WideVertexReport {
    /// (level, index from the cut).
    pub vertex: (u32, usize),
    pub disconnected_from_parents: bool,
    pub wide_to_depth: bool,
    /// Number of vertices on the same level; None when above the width cap.
    pub cousins_count: Option<u64>,
    /// Candidates tested, the successful one included.
    pub rounds: u32,
}

/// Iterative search for a vertex that is cut off from its parents and whose
/// subtree stays wide for `wideness_depth` generations. After a failure at
/// level h whose pruned component has height H the search resumes at level
/// h + H + 1.
pub fn find_wide_vertex(
    cone: &mut ConeMap,
    overlay: &PercolationOverlay,
    wideness_depth: u32,
    width_cap: usize,
) -> Result<WideVertexReport, ConeError> {
    let pm = crate::model::pruned_mean(cone.params);
    if pm <= 1.0 {
        return Err(ConeError::NotWide(pm));
    }
    let mut src = KeyedGwTree::new(cone.params, Offspring::Alpha);
    let mut from = 1u32;
    let mut rounds = 0;
    loop {
        let (level, index, v) = first_disconnected(cone, overlay, from, width_cap)?;
        rounds += 1;
        let wc = wide_check(&mut src, cone.map.key(v), wideness_depth);
        if wc.status == WideStatus::WideToDepth {
            let cousins = count_at_depth(&mut src, cone.root_key, level, width_cap as u64);
            return Ok(WideVertexReport {
                vertex: (level, index),
                disconnected_from_parents: true,
                wide_to_depth: true,
                cousins_count: cousins,
                rounds,
            });
        }
        from = level + wc.component_height + 1;
    }
}

fn first_disconnected(
    cone: &mut ConeMap,
    overlay: &PercolationOverlay,
    from: u32,
    width_cap: usize,
) -> Result<(u32, usize, VertexId), ConeError> {
    for level in from..=cone.depth {
        let start = cone
            .map
            .leftmost(level as i32)
            .ok_or(ConeError::DepthExceeded(cone.depth))?;
        let mut v = start;
        let mut i = 0;
        loop {
            if cone.disconnected_from_parents(overlay, v) {
                return Ok((level, i, v));
            }
            i += 1;
            if i >= width_cap {
                return Err(ConeError::Budget(BudgetKind::Vertices));
            }
            v = cone.map.next(v).expect("cone levels are cycles");
            if v == start {
                break;
            }
        }
    }
    Err(ConeError::DepthExceeded(cone.depth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterCount {
    /// Vertices on level h+1 with every incoming edge closed.
    pub candidates: usize,
    /// Candidates whose directed cluster reaches level h+1+R.
    pub surviving: usize,
    /// Surviving candidates grouped by intersecting clusters.
    pub groups: usize,
}

/// Position on the universal cover of the cone: number of times the cut has
/// been crossed, then the plane order of the vertex.
#[derive(Clone, Copy)]
struct Pos {
    winding: u32,
    v: VertexId,
}

fn cmp_pos(map: &LazyMap, a: Pos, b: Pos) -> Ordering {
    a.winding
        .cmp(&b.winding)
        .then_with(|| map.cmp_same_level(a.v, b.v))
}

/// First vertex reached on each level by a depth-first search that prefers
/// the rightmost (or leftmost) open edge, i.e. the extreme reachable vertex.
/// Returns None when the cluster dies before `top`.
fn extreme_profile(
    map: &mut LazyMap,
    overlay: &PercolationOverlay,
    start: VertexId,
    top: i32,
    rightmost: bool,
    winding0: u32,
) -> Option<Vec<Pos>> {
    let base = map.level(start);
    let mut first: Vec<Option<Pos>> = vec![None; (top - base + 1) as usize];
    let mut seen: HashSet<VertexId> = HashSet::new();
    let mut stack = vec![Pos {
        winding: winding0,
        v: start,
    }];
    let mut ups = Vec::new();
    while let Some(p) = stack.pop() {
        if !seen.insert(p.v) {
            continue;
        }
        let l = map.level(p.v);
        let slot = &mut first[(l - base) as usize];
        if slot.is_none() {
            *slot = Some(p);
        }
        if l == top {
            return Some(
                first
                    .into_iter()
                    .map(|x| x.expect("a path fills every level"))
                    .collect(),
            );
        }
        map.up_neighbors(p.v, &mut ups);
        let key = map.key(p.v);
        let order: Vec<usize> = if rightmost {
            (0..ups.len()).collect()
        } else {
            (0..ups.len()).rev().collect()
        };
        for o in order {
            let w = ups[o];
            if !overlay.is_open(key, o as u32) || seen.contains(&w) {
                continue;
            }
            let parent = map
                .tree_parent(w)
                .expect("levels above the root have parents");
            let wrapped = map.cmp_same_level(parent, p.v) == Ordering::Less;
            stack.push(Pos {
                winding: p.winding + u32::from(wrapped),
                v: w,
            });
        }
    }
    None
}

/// Counts groups of disjoint clusters started just above level h that each
/// climb R further levels.
pub fn count_disjoint_surviving_clusters(
    cone: &mut ConeMap,
    overlay: &PercolationOverlay,
    h: u32,
    r: u32,
    width_cap: usize,
) -> Result<ClusterCount, ConeError> {
    if h + 1 + r > cone.depth {
        return Err(ConeError::DepthExceeded(cone.depth));
    }
    let level = h + 1;
    let top = (level + r) as i32;
    let verts = cone
        .level_vertices(level, width_cap)
        .ok_or(ConeError::Budget(BudgetKind::Vertices))?;
    let mut candidates = Vec::new();
    for &v in &verts {
        if cone.disconnected_from_parents(overlay, v) {
            candidates.push(v);
        }
    }
    let mut right: Vec<Vec<Pos>> = Vec::new();
    let mut survivors = Vec::new();
    for &c in &candidates {
        if let Some(prof) = extreme_profile(&mut cone.map, overlay, c, top, true, 0) {
            right.push(prof);
            survivors.push(c);
        }
    }
    let n = survivors.len();
    if n <= 1 {
        return Ok(ClusterCount {
            candidates: candidates.len(),
            surviving: n,
            groups: n,
        });
    }
    let mut left: Vec<Vec<Pos>> = Vec::with_capacity(n);
    for (i, &s) in survivors.iter().enumerate() {
        let w = u32::from(i == 0);
        left.push(
            extreme_profile(&mut cone.map, overlay, s, top, false, w)
                .expect("survival does not depend on order"),
        );
    }
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        let j = (i + 1) % n;
        let meets = (0..right[i].len())
            .any(|l| cmp_pos(&cone.map, left[j][l], right[i][l]) != Ordering::Greater);
        if meets {
            uf.union(i, j);
        }
    }
    let groups = (0..n).map(|i| uf.find(i)).collect::<HashSet<_>>().len();
    Ok(ClusterCount {
        candidates: candidates.len(),
        surviving: n,
        groups,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Cone snapshot: levels as child counts plus the root key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSnapshot {
    pub root_key: u64,
    pub alpha: f64,
    pub depth: u32,
    pub levels: Vec<Vec<u32>>,
}

impl ConeMap {
    pub fn snapshot(&mut self, depth: u32, width_cap: usize) -> Option<ConeSnapshot> {
        let mut levels = Vec::new();
        for level in 0..=depth {
            let vs = self.level_vertices(level, width_cap)?;
            levels.push(vs.iter().map(|&v| self.map.asc_count(v)).collect());
        }
        Some(ConeSnapshot {
            root_key: self.root_key,
            alpha: self.params.alpha(),
            depth: self.depth,
            levels,
        })
    }

    /// Cone rebuilt from a snapshot's root key.
    pub fn from_snapshot(s: &ConeSnapshot, params: ModelParams) -> Self {
        Self {
            map: LazyMap::cone(params, s.root_key),
            params,
            depth: s.depth,
            root_key: s.root_key,
            attempts: 0,
        }
    }
}

/// Index of each vertex of a level, for reporting.
pub fn level_index(cone: &mut ConeMap, level: u32, cap: usize) -> Option<HashMap<VertexId, usize>> {
    Some(
        cone.level_vertices(level, cap)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cone(seed: u64, depth: u32) -> ConeMap {
        let q = ModelParams::new(2.0 / 3.0, 0.6).unwrap();
        build_cone(q, depth, &mut ChaCha8Rng::seed_from_u64(seed), 1000).unwrap()
    }

    #[test]
    fn root_level_has_width_one_and_levels_survive() {
        for seed in 0..20 {
            let mut c = cone(seed, 12);
            assert_eq!(c.level_width(0, 10).unwrap(), 1);
            assert!(c.level_width(12, 1 << 20).unwrap() >= 1);
        }
    }

    #[test]
    fn cyclic_adjacency_conservation() {
        let mut c = cone(3, 8);
        let lm = c.to_layered(8, 1 << 20).unwrap();
        for level in 0..8 {
            let edges: usize = (0..lm.width(level))
                .map(|i| lm.upward_neighbors(level, i).unwrap().len())
                .sum();
            assert_eq!(edges, lm.width(level) + lm.width(level + 1));
        }
    }

    #[test]
    fn layered_snapshot_agrees_with_lazy_adjacency() {
        let mut c = cone(5, 7);
        let lm = c.to_layered(7, 1 << 20).unwrap();
        let mut ups = Vec::new();
        for level in 0..7u32 {
            let below = c.level_vertices(level, 1 << 20).unwrap();
            let idx = level_index(&mut c, level + 1, 1 << 20).unwrap();
            for (i, &v) in below.iter().enumerate() {
                c.map_mut().up_neighbors(v, &mut ups);
                let got: Vec<usize> = ups.iter().map(|w| idx[w]).collect();
                assert_eq!(got, lm.upward_neighbors(level as usize, i).unwrap());
            }
        }
    }

    #[test]
    fn root_cluster_extremes() {
        let mut c = cone(1, 6);
        let closed = PercolationOverlay::hashed(0.0, 1);
        assert_eq!(root_cluster(&mut c, &closed, 6, 1000).unwrap().size, 1);
        let open = PercolationOverlay::hashed(1.0, 1);
        let s = root_cluster(&mut c, &open, 6, 1 << 20).unwrap();
        assert!(s.truncated);
        let total: usize = (0..=6).map(|l| c.level_width(l, 1 << 20).unwrap()).sum();
        assert_eq!(s.size, total);
    }

    #[test]
    fn wide_search_at_p0_tests_the_first_vertex_of_level_one() {
        let closed = PercolationOverlay::hashed(0.0, 2);
        let mut c = cone(9, 60);
        let start = c.map_mut().leftmost(1).unwrap();
        assert!(c.disconnected_from_parents(&closed, start));
        let rep = find_wide_vertex(&mut c, &closed, 30, 1 << 22).unwrap();
        assert!(rep.disconnected_from_parents && rep.wide_to_depth);
        if rep.rounds == 1 {
            assert_eq!(rep.vertex, (1, 0));
        }
        if rep.vertex.0 <= 14 {
            assert_eq!(
                rep.cousins_count,
                c.level_width(rep.vertex.0, 1 << 22).map(|w| w as u64)
            );
        }
        let mut src = KeyedGwTree::new(c.params(), Offspring::Alpha);
        for l in 0..8 {
            assert_eq!(
                count_at_depth(&mut src, c.root_key(), l, u64::MAX).map(|x| x as usize),
                c.level_width(l, 1 << 22)
            );
        }
    }

    #[test]
    fn counting_extremes() {
        let mut c = cone(4, 12);
        let open = PercolationOverlay::hashed(1.0, 4);
        assert_eq!(
            count_disjoint_surviving_clusters(&mut c, &open, 3, 5, 1 << 20)
                .unwrap()
                .groups,
            0
        );
        let closed = PercolationOverlay::hashed(0.0, 4);
        assert_eq!(
            count_disjoint_surviving_clusters(&mut c, &closed, 3, 5, 1 << 20)
                .unwrap()
                .groups,
            0
        );
    }

    #[test]
    fn groups_match_brute_force_union_find() {
        // Brute force: full directed clusters inside the window, merged when
        // they share a vertex.
        let mut nontrivial = 0;
        for seed in 0..40 {
            let mut c = cone(100 + seed, 14);
            let ov = PercolationOverlay::hashed(0.6, seed);
            let (h, r) = (5, 8);
            let got = count_disjoint_surviving_clusters(&mut c, &ov, h, r, 1 << 20).unwrap();
            let verts = c.level_vertices(h + 1, 1 << 20).unwrap();
            let mut sets: Vec<HashSet<VertexId>> = Vec::new();
            for &v in &verts {
                if !c.disconnected_from_parents(&ov, v) {
                    continue;
                }
                let cl = bfs_cluster(c.map_mut(), &ov, v, (h + 1 + r) as i32, 1 << 22).unwrap();
                if cl.max_level == (h + 1 + r) as i32 {
                    sets.push(cl.vertices.into_iter().collect());
                }
            }
            assert_eq!(sets.len(), got.surviving, "seed {seed}");
            let n = sets.len();
            let mut uf = UnionFind::new(n);
            for i in 0..n {
                for j in i + 1..n {
                    if !sets[i].is_disjoint(&sets[j]) {
                        uf.union(i, j);
                    }
                }
            }
            let groups = (0..n).map(|i| uf.find(i)).collect::<HashSet<_>>().len();
            assert_eq!(groups, got.groups, "seed {seed}");
            if groups >= 2 && groups < n {
                nontrivial += 1;
            }
        }
        assert!(
            nontrivial >= 5,
            "only {nontrivial} windows exercised merging"
        );
    }

    #[test]
    fn snapshot_round_trip() {
        let mut c = cone(8, 5);
        let s = c.snapshot(5, 1 << 20).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: ConeSnapshot = serde_json::from_str(&json).unwrap();
        let mut d = ConeMap::from_snapshot(&back, c.params());
        assert_eq!(d.snapshot(5, 1 << 20).unwrap(), s);
    }
}
