//! Peeling exploration of a directed cluster in the half-plane.
//!
//! The explorer keeps a boundary path L_j: for every level j the leftmost
//! vertex not yet revealed. The current vertex is L_h. Each step examines
//! the edge from L_h to L_{h+1}:
//!
//! * open: move up, L_{h+1} becomes a skeleton vertex;
//! * closed, towards a tree child: the ascending tree of L_{h+1} is cut off
//!   and L_{h+1} advances to the next upward neighbour;
//! * closed, towards the shared rightmost offspring: the descending tree of
//!   L_h inside the unrevealed region is swept, its vertices are labelled
//!   with the step, and the walk drops 1 + (height of that tree) levels.
//!
//! Above level j the boundary is stored together with the vertex below it
//! that it was derived from; an entry whose base is no longer the boundary
//! below is stale and is recomputed as the first upward neighbour.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::walk::HeightWalk;
use crate::error::{BudgetExceeded, BudgetKind};
use crate::halfplane::{LazyMap, PercolationOverlay, VertexId};

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub max_steps: u64,
    /// Cap on the height reached above the start.
    pub max_level: i64,
    /// Cap on generated map vertices.
    pub max_vertices: usize,
    pub max_skeleton: Option<usize>,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            max_level: 100_000,
            max_vertices: 50_000_000,
            max_skeleton: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepKind {
    Open,
    ClosedUp,
    ClosedDown { drop: i64 },
}

impl StepKind {
    pub fn increment(self) -> i64 {
        match self {
            StepKind::Open => 1,
            StepKind::ClosedUp => 0,
            StepKind::ClosedDown { drop } => drop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub height: i64,
    #[serde(flatten)]
    pub kind: StepKind,
    /// Cluster vertices revealed by this step: 1 for an open step, the
    /// number found in the swept region for a downward step, else 0.
    pub theta: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub start: VertexId,
    pub steps: Vec<StepRecord>,
    /// Skeleton vertices in visiting order; index 0 is the start.
    pub skeleton: Vec<VertexId>,
    pub skeleton_parent: Vec<Option<u32>>,
    /// Skeleton index of the current vertex before each step.
    pub step_vertex: Vec<u32>,
    /// Cluster vertices off the skeleton, found after termination.
    pub left_behind: Vec<VertexId>,
    /// Left-behind vertices lying in regions swept by earlier explorations
    /// on the same map; they carry no θ. Always 0 for a single exploration.
    pub inherited: u64,
    /// Open edges from the found cluster into vertices never swept. Zero for
    /// a finished exploration.
    pub escaped: u64,
    pub terminated: bool,
}

impl ExplorationTrace {
    pub fn walk(&self) -> HeightWalk {
        HeightWalk::from_increments(self.steps.iter().map(|s| s.kind.increment()).collect())
    }

    pub fn cluster_size(&self) -> usize {
        self.skeleton.len() + self.left_behind.len()
    }

    pub fn left_behind_total(&self) -> usize {
        self.left_behind.len()
    }

    pub fn cluster_vertices(&self) -> Vec<VertexId> {
        let mut v = self.skeleton.clone();
        v.extend_from_slice(&self.left_behind);
        v
    }

    /// Largest single drop, i.e. the height bound for swept regions.
    pub fn max_jump(&self) -> i64 {
        self.steps
            .iter()
            .map(|s| -s.kind.increment())
            .max()
            .unwrap_or(0)
            .max(0)
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.steps {
            s.push_str(&serde_json::to_string(r).expect("step serializes"));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    v: VertexId,
    base: VertexId,
    offset: u32,
}

/// Explorer state shared by successive explorations on one map.
pub struct Explorer<'a> {
    map: &'a mut LazyMap,
    overlay: &'a PercolationOverlay,
    lo: i32,
    entries: VecDeque<Entry>,
    /// (exploration + 1) << 32 | step for swept vertices, 0 otherwise.
    red: Vec<u64>,
    /// exploration + 1 for vertices already assigned to a cluster part.
    owner: Vec<u32>,
    explorations: u32,
    ups: Vec<VertexId>,
}

impl<'a> Explorer<'a> {
    pub fn new(map: &'a mut LazyMap, overlay: &'a PercolationOverlay) -> Self {
        let v0 = map.leftmost(0).expect("half-plane");
        let mut entries = VecDeque::new();
        entries.push_back(Entry {
            v: v0,
            base: NIL,
            offset: 0,
        });
        Self {
            map,
            overlay,
            lo: 0,
            entries,
            red: Vec::new(),
            owner: Vec::new(),
            explorations: 0,
            ups: Vec::new(),
        }
    }

    pub fn map(&mut self) -> &mut LazyMap {
        self.map
    }

    fn hi(&self) -> i32 {
        self.lo + self.entries.len() as i32 - 1
    }

    fn ensure_below(&mut self, j: i32) {
        while self.lo > j {
            let top = self.entries[0].v;
            let below = self
                .map
                .lambda(top)
                .expect("half-plane vertices have parents");
            let off = self
                .map
                .up_offset(below, top)
                .expect("leftmost parent edge");
            self.entries[0].base = below;
            self.entries[0].offset = off;
            self.entries.push_front(Entry {
                v: below,
                base: NIL,
                offset: 0,
            });
            self.lo -= 1;
        }
    }

    fn idx(&self, j: i32) -> usize {
        (j - self.lo) as usize
    }

    /// Boundary vertex at level j ≤ current height.
    fn boundary(&mut self, j: i32) -> VertexId {
        self.ensure_below(j);
        self.entries[self.idx(j)].v
    }

    /// The boundary edge above level h, recomputing a stale entry.
    fn upper(&mut self, h: i32) -> (VertexId, u32) {
        let v = self.boundary(h);
        let j = h + 1;
        if j > self.hi() {
            let y = self
                .map
                .up_neighbor(v, 0)
                .expect("every vertex has an upward edge");
            self.entries.push_back(Entry {
                v: y,
                base: v,
                offset: 0,
            });
            return (y, 0);
        }
        let i = self.idx(j);
        if self.entries[i].base != v {
            let y = self
                .map
                .up_neighbor(v, 0)
                .expect("every vertex has an upward edge");
            self.entries[i] = Entry {
                v: y,
                base: v,
                offset: 0,
            };
        }
        (self.entries[i].v, self.entries[i].offset)
    }

    fn set(&mut self, j: i32, v: VertexId) {
        let i = self.idx(j);
        self.entries[i].v = v;
    }

    fn relink(&mut self, j: i32) {
        if j > self.hi() {
            return;
        }
        self.ensure_below(j - 1);
        let base = self.entries[self.idx(j - 1)].v;
        let top = self.entries[self.idx(j)].v;
        let off = self.map.up_offset(base, top).expect("boundary is a path");
        let i = self.idx(j);
        self.entries[i].base = base;
        self.entries[i].offset = off;
    }

    fn grow(&mut self) {
        let n = self.map.num_generated();
        if self.red.len() < n {
            self.red.resize(n, 0);
            self.owner.resize(n, 0);
        }
    }

    fn label(&self, expl: u32, step: u64) -> u64 {
        ((expl as u64 + 1) << 32) | step
    }

    /// Sweeps the unrevealed descending tree of the vertex at height h and
    /// returns its height.
    fn sweep_down(&mut self, h: i32, label: u64) -> i32 {
        let v = self.boundary(h);
        let mut r_cur = v;
        let mut j = h;
        let mut changed = Vec::new();
        loop {
            let r = self
                .map
                .rho(r_cur)
                .expect("half-plane vertices have parents");
            let lb = self.boundary(j - 1);
            if r == lb {
                break;
            }
            let mut w = lb;
            while w != r {
                self.grow();
                self.red[w as usize] = label;
                w = self.map.next(w).expect("half-plane levels are infinite");
            }
            changed.push((j - 1, r));
            r_cur = self.map.prev(r).expect("r lies right of the boundary");
            j -= 1;
        }
        let big_h = h - j;
        let z = self.map.next(v).expect("half-plane levels are infinite");
        self.set(h, z);
        for (l, r) in changed {
            self.set(l, r);
        }
        for l in (h - big_h)..=(h + 1) {
            self.relink(l);
        }
        big_h
    }

    /// True when `v` (at level 0) lies in the region already revealed.
    pub fn is_swallowed(&mut self, v: VertexId) -> bool {
        let l0 = self.boundary(0);
        self.map.cmp_same_level(v, l0) == std::cmp::Ordering::Less
    }

    /// Moves the boundary right so that it starts at `v` on level 0,
    /// discarding everything to the left of v and below its left column.
    pub fn restart_at(&mut self, v: VertexId) {
        assert_eq!(self.map.level(v), 0, "explorations start on level 0");
        assert!(!self.is_swallowed(v), "start already revealed");
        self.set(0, v);
        let mut j = 0;
        while j > self.lo {
            let newer = self.boundary(j);
            let cand = self
                .map
                .lambda(newer)
                .expect("half-plane vertices have parents");
            let old = self.boundary(j - 1);
            let next = if self.map.cmp_same_level(cand, old) == std::cmp::Ordering::Greater {
                cand
            } else {
                old
            };
            let unchanged = next == old;
            self.set(j - 1, next);
            self.relink(j);
            if unchanged {
                break;
            }
            j -= 1;
        }
    }

    /// Runs one exploration from the current boundary vertex at level 0.
    pub fn explore(
        &mut self,
        budgets: Budgets,
    ) -> Result<ExplorationTrace, BudgetExceeded<ExplorationTrace>> {
        let expl = self.explorations;
        self.explorations += 1;
        let start = self.boundary(0);
        let mut skeleton = vec![start];
        let mut skeleton_parent = vec![None];
        let mut stack: Vec<u32> = vec![0];
        let mut steps = Vec::new();
        let mut step_vertex = Vec::new();
        let mut h: i32 = 0;
        let mut over = None;
        loop {
            let t = steps.len() as u64;
            let v = self.boundary(h);
            debug_assert_eq!(skeleton[*stack.last().unwrap() as usize], v);
            step_vertex.push(*stack.last().unwrap());
            let (y, off) = self.upper(h);
            let open = self.overlay.is_open(self.map.key(v), off);
            let kind = if open {
                h += 1;
                let idx = skeleton.len() as u32;
                skeleton.push(y);
                skeleton_parent.push(stack.last().copied());
                stack.push(idx);
                StepKind::Open
            } else if off < self.map.asc_count(v) {
                let z = self.map.next(y).expect("half-plane levels are infinite");
                self.set(h + 1, z);
                self.relink(h + 1);
                StepKind::ClosedUp
            } else {
                let big_h = self.sweep_down(h, self.label(expl, t));
                h -= 1 + big_h;
                stack.truncate((h + 1).max(0) as usize);
                StepKind::ClosedDown {
                    drop: -1 - big_h as i64,
                }
            };
            let theta = u64::from(kind == StepKind::Open);
            steps.push(StepRecord {
                step: t,
                height: (h as i64) - kind.increment(),
                kind,
                theta,
            });
            if h < 0 {
                break;
            }
            if steps.len() as u64 >= budgets.max_steps {
                over = Some(BudgetKind::Steps);
            } else if h as i64 >= budgets.max_level {
                over = Some(BudgetKind::Level);
            } else if self.map.num_generated() > budgets.max_vertices || self.map.over_budget() {
                over = Some(BudgetKind::Vertices);
            } else if budgets.max_skeleton.is_some_and(|c| skeleton.len() >= c) {
                over = Some(BudgetKind::Skeleton);
            }
            if over.is_some() {
                break;
            }
        }
        let terminated = over.is_none();
        let mut trace = ExplorationTrace {
            start,
            steps,
            skeleton,
            skeleton_parent,
            step_vertex,
            left_behind: Vec::new(),
            inherited: 0,
            escaped: 0,
            terminated,
        };
        if terminated {
            self.collect_left_behind(expl, &mut trace);
            debug_assert_eq!(trace.escaped, 0, "cluster leaks out of the swept region");
        }
        match over {
            None => Ok(trace),
            Some(kind) => Err(BudgetExceeded {
                kind,
                partial: trace,
            }),
        }
    }

    /// Breadth-first search from the skeleton restricted to vertices swept by
    /// exploration `expl`; attributes each find to the step that swept it.
    fn collect_left_behind(&mut self, expl: u32, trace: &mut ExplorationTrace) {
        let me = expl + 1;
        self.grow();
        for &v in &trace.skeleton {
            self.owner[v as usize] = me;
        }
        let mut queue: VecDeque<VertexId> = trace.skeleton.iter().copied().collect();
        let mut ups = std::mem::take(&mut self.ups);
        while let Some(u) = queue.pop_front() {
            let key = self.map.key(u);
            self.map.up_neighbors(u, &mut ups);
            self.grow();
            for (o, &w) in ups.iter().enumerate() {
                if !self.overlay.is_open(key, o as u32) || self.owner[w as usize] != 0 {
                    continue;
                }
                let lab = self.red[w as usize];
                let by = (lab >> 32) as u32;
                if by == 0 || by > me {
                    trace.escaped += 1;
                    continue;
                }
                self.owner[w as usize] = me;
                queue.push_back(w);
                trace.left_behind.push(w);
                if by == me {
                    trace.steps[(lab & 0xffff_ffff) as usize].theta += 1;
                } else {
                    trace.inherited += 1;
                }
            }
        }
        self.ups = ups;
    }
}

impl Explorer<'_> {
    /// Adds the not yet assigned part of the cluster of `start` by plain
    /// BFS and returns its size.
    fn absorb(&mut self, start: VertexId, cap: usize) -> Option<Vec<VertexId>> {
        let tag = self.explorations + 1;
        self.explorations += 1;
        self.grow();
        if self.owner[start as usize] != 0 {
            return Some(Vec::new());
        }
        self.owner[start as usize] = tag;
        let mut got = vec![start];
        let mut queue = VecDeque::from([start]);
        let mut ups = std::mem::take(&mut self.ups);
        while let Some(u) = queue.pop_front() {
            let key = self.map.key(u);
            self.map.up_neighbors(u, &mut ups);
            self.grow();
            for (o, &w) in ups.iter().enumerate() {
                if self.overlay.is_open(key, o as u32) && self.owner[w as usize] == 0 {
                    self.owner[w as usize] = tag;
                    got.push(w);
                    queue.push_back(w);
                }
            }
            if got.len() > cap {
                self.ups = ups;
                return None;
            }
        }
        self.ups = ups;
        Some(got)
    }
}

/// Explores the cluster of `start` (a level-0 vertex) on a fresh boundary.
pub fn explore_cluster(
    map: &mut LazyMap,
    overlay: &PercolationOverlay,
    start: VertexId,
    budgets: Budgets,
) -> Result<ExplorationTrace, BudgetExceeded<ExplorationTrace>> {
    let mut ex = Explorer::new(map, overlay);
    if ex.boundary(0) != start {
        ex.restart_at(start);
    }
    ex.explore(budgets)
}

/// Like [`explore_cluster`], but a run stopped at a budget still collects
/// the cluster vertices lying in the regions swept so far. Open edges out of
/// those regions are tallied in `escaped`.
pub fn explore_cluster_partial(
    map: &mut LazyMap,
    overlay: &PercolationOverlay,
    start: VertexId,
    budgets: Budgets,
) -> (ExplorationTrace, Option<BudgetKind>) {
    let mut ex = Explorer::new(map, overlay);
    if ex.boundary(0) != start {
        ex.restart_at(start);
    }
    match ex.explore(budgets) {
        Ok(tr) => (tr, None),
        Err(e) => {
            let mut tr = e.partial;
            let expl = ex.explorations - 1;
            ex.collect_left_behind(expl, &mut tr);
            (tr, Some(e.kind))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionPart {
    pub start_index: usize,
    pub start: VertexId,
    /// Vertices of this start's cluster not in any earlier part.
    pub size: usize,
    /// Of those, the ones reached through regions revealed earlier.
    pub inherited: u64,
    pub walk_length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiExploreResult {
    pub parts: Vec<UnionPart>,
    /// Start indices already inside an earlier part's revealed region.
    pub skipped: Vec<usize>,
    /// Vertices reached only from skipped starts, collected by BFS.
    pub swallowed_extra: usize,
    /// Union of the parts' vertex sets, in canonical order.
    pub vertices: Vec<VertexId>,
    pub stopover_count: usize,
}

/// Explores the union of the clusters of several level-0 vertices, given
/// left to right, reusing the revealed region between stopovers.
pub fn explore_union(
    map: &mut LazyMap,
    overlay: &PercolationOverlay,
    starts: &[VertexId],
    budgets: Budgets,
) -> Result<MultiExploreResult, BudgetExceeded<MultiExploreResult>> {
    let mut parts = Vec::new();
    let mut skipped = Vec::new();
    let mut vertices = Vec::new();
    let mut swallowed_extra = 0;
    let mut failure = None;
    {
        let mut ex = Explorer::new(map, overlay);
        for (i, &s) in starts.iter().enumerate() {
            if ex.is_swallowed(s) {
                skipped.push(i);
                continue;
            }
            if ex.boundary(0) != s {
                ex.restart_at(s);
            }
            match ex.explore(budgets) {
                Ok(tr) => {
                    parts.push(UnionPart {
                        start_index: i,
                        start: s,
                        size: tr.cluster_size(),
                        inherited: tr.inherited,
                        walk_length: tr.steps.len() as u64,
                    });
                    vertices.extend(tr.cluster_vertices());
                }
                Err(e) => {
                    failure = Some(e.kind);
                    break;
                }
            }
        }
        if failure.is_none() {
            for &i in &skipped {
                match ex.absorb(starts[i], budgets.max_vertices) {
                    Some(extra) => {
                        swallowed_extra += extra.len();
                        vertices.extend(extra);
                    }
                    None => {
                        failure = Some(BudgetKind::Vertices);
                        break;
                    }
                }
            }
        }
    }
    vertices.sort_by_cached_key(|&v| map.canonical_key(v));
    let stopover_count = parts.len();
    let res = MultiExploreResult {
        parts,
        skipped,
        swallowed_extra,
        vertices,
        stopover_count,
    };
    match failure {
        None => Ok(res),
        Some(kind) => Err(BudgetExceeded { kind, partial: res }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HausdorffGap {
    /// Largest graph distance from a cluster vertex to the skeleton.
    pub gap: u32,
    /// Largest drop of the walk.
    pub max_jump: u32,
}

impl HausdorffGap {
    pub fn within_bound(&self) -> bool {
        self.gap <= self.max_jump
    }
}

/// Exact distance in the (undirected) map from each left-behind vertex to
/// the skeleton. Searches are cut at `max_jump + 1`.
pub fn hausdorff_gap(trace: &ExplorationTrace, map: &mut LazyMap) -> HausdorffGap {
    let max_jump = trace.max_jump() as u32;
    let skel: HashSet<VertexId> = trace.skeleton.iter().copied().collect();
    let mut gap = 0;
    let mut buf = Vec::new();
    for &w in &trace.left_behind {
        let mut seen: HashSet<VertexId> = HashSet::from([w]);
        let mut frontier = vec![w];
        let mut d = 0;
        let dist = 'bfs: loop {
            if frontier.iter().any(|x| skel.contains(x)) {
                break 'bfs d;
            }
            if d > max_jump {
                break 'bfs d;
            }
            let mut next = Vec::new();
            for &x in &frontier {
                let mut nb = Vec::new();
                map.up_neighbors(x, &mut buf);
                nb.extend_from_slice(&buf);
                map.parents(x, &mut buf);
                nb.extend_from_slice(&buf);
                nb.extend(map.prev(x));
                nb.extend(map.next(x));
                for y in nb {
                    if seen.insert(y) {
                        next.push(y);
                    }
                }
            }
            frontier = next;
            d += 1;
        };
        gap = gap.max(dist);
    }
    HausdorffGap { gap, max_jump }
}
