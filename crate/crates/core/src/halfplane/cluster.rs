use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::lazymap::{LazyMap, VertexId};
use super::overlay::PercolationOverlay;
use crate::error::{BudgetExceeded, BudgetKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterStats {
    /// Vertices in canonical (level, left-to-right) order.
    pub vertices: Vec<VertexId>,
    pub size: usize,
    /// Some vertex at the level cap was reached, so the set may be incomplete.
    pub truncated: bool,
    pub max_level: i32,
}

/// Directed cluster of `starts` following open upward edges, not expanding
/// past `level_cap`. `vertex_budget` bounds the cluster size.
pub fn bfs_cluster_multi(
    map: &mut LazyMap,
    overlay: &PercolationOverlay,
    starts: &[VertexId],
    level_cap: i32,
    vertex_budget: usize,
) -> Result<ClusterStats, BudgetExceeded<ClusterStats>> {
    let mut seen: HashSet<VertexId> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut order = Vec::new();
    for &s in starts {
        assert!(map.level(s) <= level_cap, "start above the level cap");
        if seen.insert(s) {
            queue.push_back(s);
            order.push(s);
        }
    }
    let mut truncated = false;
    let mut over = false;
    let mut ups = Vec::new();
    while let Some(v) = queue.pop_front() {
        if map.level(v) >= level_cap {
            truncated = true;
            continue;
        }
        map.up_neighbors(v, &mut ups);
        let key = map.key(v);
        for (o, &w) in ups.iter().enumerate() {
            if overlay.is_open(key, o as u32) && seen.insert(w) {
                order.push(w);
                queue.push_back(w);
            }
        }
        if order.len() > vertex_budget {
            over = true;
            break;
        }
    }
    let stats = finish(map, order, truncated);
    if over {
        Err(BudgetExceeded {
            kind: BudgetKind::Vertices,
            partial: stats,
        })
    } else {
        Ok(stats)
    }
}

pub fn bfs_cluster(
    map: &mut LazyMap,
    overlay: &PercolationOverlay,
    start: VertexId,
    level_cap: i32,
    vertex_budget: usize,
) -> Result<ClusterStats, BudgetExceeded<ClusterStats>> {
    bfs_cluster_multi(map, overlay, &[start], level_cap, vertex_budget)
}

fn finish(map: &LazyMap, mut order: Vec<VertexId>, truncated: bool) -> ClusterStats {
    order.sort_by_cached_key(|&v| map.canonical_key(v));
    let max_level = order.iter().map(|&v| map.level(v)).max().unwrap_or(0);
    ClusterStats {
        size: order.len(),
        vertices: order,
        truncated,
        max_level,
    }
}

/// Outcome of a depth-first probe for a directed path to a target level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub reached: bool,
    /// Vertices visited before stopping; the exact cluster size when not reached.
    pub explored: usize,
}

/// Depth-first search with early exit at `target_level`. Cheap for
/// supercritical clusters, which would be exponentially large under BFS.
pub fn reaches_level(
    map: &mut LazyMap,
    overlay: &PercolationOverlay,
    start: VertexId,
    target_level: i32,
) -> Probe {
    let mut seen: HashSet<VertexId> = HashSet::new();
    seen.insert(start);
    let mut stack = vec![start];
    let mut ups = Vec::new();
    while let Some(v) = stack.pop() {
        if map.level(v) >= target_level {
            return Probe {
                reached: true,
                explored: seen.len(),
            };
        }
        map.up_neighbors(v, &mut ups);
        let key = map.key(v);
        for (o, &w) in ups.iter().enumerate() {
            if overlay.is_open(key, o as u32) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    Probe {
        reached: false,
        explored: seen.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn setup(p: f64, seed: u64) -> (LazyMap, PercolationOverlay) {
        let q = ModelParams::new(2.0 / 3.0, p).unwrap();
        (
            LazyMap::half_plane(q, seed),
            PercolationOverlay::hashed(p, seed),
        )
    }

    #[test]
    fn closed_edges_give_singleton() {
        let (mut m, o) = setup(0.0, 1);
        let s = m.root(0);
        let c = bfs_cluster(&mut m, &o, s, 50, 1000).unwrap();
        assert_eq!(c.vertices, vec![s]);
        assert!(!c.truncated);
    }

    #[test]
    fn open_edges_fill_the_ball() {
        let (mut m, o) = setup(1.0, 2);
        let s = m.root(0);
        let c = bfs_cluster(&mut m, &o, s, 4, 1_000_000).unwrap();
        assert!(c.truncated);
        assert_eq!(c.max_level, 4);
        // With every edge open the cluster of the corner is the set of
        // vertices between the left column and the rightmost path.
        let mut expect = 0;
        let mut right = s;
        for level in 0..=4 {
            let mut v = m.leftmost(level).unwrap();
            expect += 1;
            while v != right {
                v = m.next(v).unwrap();
                expect += 1;
            }
            if level < 4 {
                let k = m.asc_count(right);
                right = m.up_neighbor(right, k).unwrap();
            }
        }
        assert_eq!(c.size, expect);
    }

    #[test]
    fn clusters_nest_in_p() {
        for seed in 0..30 {
            let (mut m, lo) = setup(0.3, seed);
            let hi = lo.with_p(0.45);
            let s = m.root(0);
            let a = bfs_cluster(&mut m, &lo, s, 30, 100_000).unwrap();
            let b = bfs_cluster(&mut m, &hi, s, 30, 100_000).unwrap();
            let bs: HashSet<_> = b.vertices.iter().collect();
            assert!(a.vertices.iter().all(|v| bs.contains(v)));
        }
    }
}
