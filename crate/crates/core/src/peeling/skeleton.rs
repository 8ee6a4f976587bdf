use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::explorer::ExplorationTrace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("walk height {walk} at step {step} differs from skeleton depth {depth}")]
    HeightMismatch { step: usize, walk: i64, depth: u32 },
    #[error("exploration did not terminate")]
    NotTerminated,
    #[error("trace is malformed: {0}")]
    Malformed(String),
}

/// The skeleton as a plane tree, children in visiting order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonTree {
    pub parent: Vec<Option<u32>>,
    pub depth: Vec<u32>,
    pub children: Vec<Vec<u32>>,
}

impl SkeletonTree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Graph distance between two skeleton vertices.
    pub fn distance(&self, mut a: u32, mut b: u32) -> u32 {
        let mut d = 0;
        while self.depth[a as usize] > self.depth[b as usize] {
            a = self.parent[a as usize].unwrap();
            d += 1;
        }
        while self.depth[b as usize] > self.depth[a as usize] {
            b = self.parent[b as usize].unwrap();
            d += 1;
        }
        while a != b {
            a = self.parent[a as usize].unwrap();
            b = self.parent[b as usize].unwrap();
            d += 2;
        }
        d
    }

    /// Depth sequence of the depth-first walk around the tree, 2(n−1)+1 values.
    pub fn contour(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(2 * self.len());
        if self.is_empty() {
            return out;
        }
        let mut stack: Vec<(u32, usize)> = vec![(0, 0)];
        out.push(0);
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&c) = self.children[v as usize].get(*next) {
                *next += 1;
                stack.push((c, 0));
                out.push(self.depth[c as usize]);
            } else {
                stack.pop();
                if let Some(&(u, _)) = stack.last() {
                    out.push(self.depth[u as usize]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    pub tree: SkeletonTree,
    /// (t, H(t)) for t = 0..=T, with the final value clamped to 0. Linear
    /// interpolation between the points gives the contour function.
    pub points: Vec<(u64, i64)>,
}

impl Contour {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,h\n");
        for (t, h) in &self.points {
            s.push_str(&format!("{t},{h}\n"));
        }
        s
    }
}

/// Rebuilds the skeleton tree from a trace and checks that the height walk
/// equals the depth of the current vertex at every step.
pub fn extract_skeleton_and_contour(trace: &ExplorationTrace) -> Result<Contour, SkeletonError> {
    if !trace.terminated {
        return Err(SkeletonError::NotTerminated);
    }
    let n = trace.skeleton.len();
    if trace.skeleton_parent.len() != n || trace.step_vertex.len() != trace.steps.len() {
        return Err(SkeletonError::Malformed("length mismatch".into()));
    }
    let mut depth = vec![0u32; n];
    let mut children = vec![Vec::new(); n];
    for (i, p) in trace.skeleton_parent.iter().enumerate() {
        match (*p, i) {
            (None, 0) => {}
            (Some(p), i) if (p as usize) < i => {
                depth[i] = depth[p as usize] + 1;
                children[p as usize].push(i as u32);
            }
            _ => return Err(SkeletonError::Malformed(format!("bad parent at {i}"))),
        }
    }
    let walk = trace.walk();
    let heights = &walk.heights[..trace.steps.len()];
    for (step, (&h, &v)) in heights.iter().zip(&trace.step_vertex).enumerate() {
        let d = *depth
            .get(v as usize)
            .ok_or_else(|| SkeletonError::Malformed(format!("step {step} names vertex {v}")))?;
        if h != d as i64 {
            return Err(SkeletonError::HeightMismatch {
                step,
                walk: h,
                depth: d,
            });
        }
    }
    let tree = SkeletonTree {
        parent: trace.skeleton_parent.clone(),
        depth,
        children,
    };
    let points = walk
        .heights
        .iter()
        .enumerate()
        .map(|(t, &h)| (t as u64, h.max(0)))
        .collect();
    Ok(Contour { tree, points })
}

/// Distance between the vertices current at steps s ≤ t, read off the walk:
/// H(s) + H(t) − 2·min H on [s, t].
pub fn walk_distance(heights: &[i64], s: usize, t: usize) -> i64 {
    let m = heights[s..=t].iter().copied().min().unwrap();
    heights[s] + heights[t] - 2 * m
}
