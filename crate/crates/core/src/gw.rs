//! Galton–Watson plane trees: explicit truncated samples, lazily keyed trees
//! for depths where explicit storage is hopeless, and the wideness pruning.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{BudgetExceeded, BudgetKind, ParamError};
use crate::keyed;
use crate::model::ModelParams;

pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Offspring {
    /// μ_α, the ascending (supercritical) law.
    Alpha,
    /// μ_{1−α}, the descending (subcritical) law.
    OneMinusAlpha,
}

impl Offspring {
    pub fn beta(self, params: ModelParams) -> f64 {
        match self {
            Offspring::Alpha => params.alpha(),
            Offspring::OneMinusAlpha => 1.0 - params.alpha(),
        }
    }
}

/// Rooted plane tree; node 0 is the root and children lists are ordered.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlaneTree {
    children: Vec<Vec<usize>>,
    depth: Vec<u32>,
}

impl PlaneTree {
    pub fn single() -> Self {
        Self {
            children: vec![Vec::new()],
            depth: vec![0],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> u32 {
        self.depth[v]
    }

    /// Appends a new child to the right of `v`'s existing children.
    pub fn add_child(&mut self, v: usize) -> usize {
        let id = self.children.len();
        self.children.push(Vec::new());
        self.depth.push(self.depth[v] + 1);
        self.children[v].push(id);
        id
    }

    /// Builds a tree from per-node child counts listed in breadth-first order.
    pub fn from_bfs_counts(counts: &[u32]) -> Result<Self, ParamError> {
        let mut t = PlaneTree::single();
        let mut next = 0usize;
        for &c in counts {
            if next >= t.len() {
                return Err(ParamError::Invalid("more counts than nodes".into()));
            }
            for _ in 0..c {
                t.add_child(next);
            }
            next += 1;
        }
        if next != t.len() {
            return Err(ParamError::Invalid("fewer counts than nodes".into()));
        }
        Ok(t)
    }

    /// Newline-free parenthesis encoding, one "(...)" per node.
    pub fn to_parens(&self) -> String {
        let mut out = String::with_capacity(2 * self.len());
        let mut stack = vec![(0usize, 0usize)];
        out.push('(');
        while let Some((v, i)) = stack.pop() {
            if i < self.children[v].len() {
                stack.push((v, i + 1));
                out.push('(');
                stack.push((self.children[v][i], 0));
            } else {
                out.push(')');
            }
        }
        out
    }

    pub fn from_parens(s: &str) -> Result<Self, ParamError> {
        let bad = || ParamError::Invalid(format!("malformed parenthesis encoding: {s}"));
        let mut chars = s.trim().chars();
        if chars.next() != Some('(') {
            return Err(bad());
        }
        let mut t = PlaneTree::single();
        let mut stack = vec![0usize];
        for c in chars {
            match c {
                '(' => {
                    let top = *stack.last().ok_or_else(bad)?;
                    let id = t.add_child(top);
                    stack.push(id);
                }
                ')' => {
                    stack.pop().ok_or_else(bad)?;
                }
                _ => return Err(bad()),
            }
        }
        if stack.is_empty() {
            Ok(t)
        } else {
            Err(bad())
        }
    }
}

pub fn tree_height(tree: &PlaneTree) -> u32 {
    tree.depth.iter().copied().max().unwrap_or(0)
}

pub fn tree_size(tree: &PlaneTree) -> usize {
    tree.len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedTree {
    pub tree: PlaneTree,
    pub depth_cutoff: u32,
    pub frontier_alive: bool,
}

/// Breadth-first GW_β sample stopped at `depth_cutoff`.
pub fn sample_gw<R: Rng + ?Sized>(
    params: ModelParams,
    offspring: Offspring,
    depth_cutoff: u32,
    rng: &mut R,
    node_budget: usize,
) -> Result<TruncatedTree, BudgetExceeded<TruncatedTree>> {
    let beta = offspring.beta(params);
    let law = Geometric::new(1.0 - beta).expect("valid geometric parameter");
    let mut tree = PlaneTree::single();
    let mut v = 0usize;
    while v < tree.len() {
        if tree.depth[v] < depth_cutoff {
            let k = law.sample(rng);
            for _ in 0..k {
                if tree.len() >= node_budget {
                    let frontier_alive = tree.depth.contains(&depth_cutoff);
                    return Err(BudgetExceeded {
                        kind: BudgetKind::Vertices,
                        partial: TruncatedTree {
                            tree,
                            depth_cutoff,
                            frontier_alive,
                        },
                    });
                }
                tree.add_child(v);
            }
        }
        v += 1;
    }
    let frontier_alive = tree.depth.contains(&depth_cutoff);
    Ok(TruncatedTree {
        tree,
        depth_cutoff,
        frontier_alive,
    })
}

#[derive(Debug, Clone)]
pub struct ConditionedTree {
    pub tree: TruncatedTree,
    /// Number of draws including the accepted one.
    pub attempts: u32,
    /// P(survive to cutoff) − P(survive forever), the bias of the finite-depth proxy.
    pub cutoff_bias: f64,
}

/// P(Z_n = 0) for GW_α, by iterating f(s) = (1−α)/(1−αs).
pub fn extinct_by(params: ModelParams, n: u32) -> f64 {
    let a = params.alpha();
    let mut s = 0.0;
    for _ in 0..n {
        s = (1.0 - a) / (1.0 - a * s);
    }
    s
}

/// GW_α conditioned on reaching `depth_cutoff`, by rejection.
pub fn sample_gw_conditioned_to_survive<R: Rng + ?Sized>(
    params: ModelParams,
    depth_cutoff: u32,
    rng: &mut R,
    node_budget: usize,
    max_rejections: u32,
) -> Result<ConditionedTree, BudgetExceeded<Option<TruncatedTree>>> {
    assert!(depth_cutoff >= 1, "depth_cutoff must be at least 1");
    let cutoff_bias = 1.0 / params.m() - extinct_by(params, depth_cutoff);
    for attempt in 1..=max_rejections.max(1) {
        match sample_gw(params, Offspring::Alpha, depth_cutoff, rng, node_budget) {
            Ok(t) if t.frontier_alive => {
                return Ok(ConditionedTree {
                    tree: t,
                    attempts: attempt,
                    cutoff_bias,
                })
            }
            Ok(_) => {}
            Err(e) => {
                return Err(BudgetExceeded {
                    kind: e.kind,
                    partial: Some(e.partial),
                });
            }
        }
    }
    Err(BudgetExceeded {
        kind: BudgetKind::Rejections,
        partial: None,
    })
}

/// Read access to a plane tree that may be generated on demand.
pub trait TreeSource {
    type Node: Copy;
    fn child_count(&mut self, v: Self::Node) -> u32;
    fn child(&mut self, v: Self::Node, i: u32) -> Self::Node;
}

impl TreeSource for &PlaneTree {
    type Node = usize;
    fn child_count(&mut self, v: usize) -> u32 {
        self.children[v].len() as u32
    }
    fn child(&mut self, v: usize, i: u32) -> usize {
        self.children[v][i as usize]
    }
}

/// GW_β tree whose nodes are keys; counts are hashed from the key, so the
/// whole infinite tree is determined by the root key.
#[derive(Debug, Clone, Copy)]
pub struct KeyedGwTree {
    ln_beta: f64,
    ascending: bool,
}

impl KeyedGwTree {
    pub fn new(params: ModelParams, offspring: Offspring) -> Self {
        Self {
            ln_beta: offspring.beta(params).ln(),
            ascending: offspring == Offspring::Alpha,
        }
    }
}

impl TreeSource for KeyedGwTree {
    type Node = u64;
    fn child_count(&mut self, v: u64) -> u32 {
        if self.ascending {
            keyed::asc_count(v, self.ln_beta)
        } else {
            keyed::desc_count(v, self.ln_beta)
        }
    }
    fn child(&mut self, v: u64, i: u32) -> u64 {
        if self.ascending {
            keyed::asc_child_key(v, i)
        } else {
            keyed::desc_child_key(v, i)
        }
    }
}

/// Does the tree below `root` reach `depth` levels down? Depth-first with
/// early exit, so supercritical trees cost O(depth) when they survive.
pub fn survives_to<S: TreeSource>(src: &mut S, root: S::Node, depth: u32) -> bool {
    let mut stack = vec![(root, 0u32)];
    while let Some((v, d)) = stack.pop() {
        if d == depth {
            return true;
        }
        let k = src.child_count(v);
        for i in 0..k {
            stack.push((src.child(v, i), d + 1));
        }
    }
    false
}

/// Number of nodes at `depth` below `root`, or None once it exceeds `cap`.
/// Memory stays O(depth · max offspring).
pub fn count_at_depth<S: TreeSource>(
    src: &mut S,
    root: S::Node,
    depth: u32,
    cap: u64,
) -> Option<u64> {
    let mut stack = vec![(root, 0u32)];
    let mut count = 0u64;
    while let Some((v, d)) = stack.pop() {
        if d == depth {
            count += 1;
            if count > cap {
                return None;
            }
            continue;
        }
        let k = src.child_count(v);
        for i in 0..k {
            stack.push((src.child(v, i), d + 1));
        }
    }
    Some(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WideStatus {
    WideToDepth,
    PrunedDead,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WideCheck {
    pub status: WideStatus,
    /// Height of the pruned component; when wide, the cutoff.
    pub component_height: u32,
}

/// Leftmost-child pruning: every node keeps children 1..k, drops child 0 and
/// its subtree. Reports whether the pruned component reaches `cutoff`.
pub fn wide_check<S: TreeSource>(src: &mut S, root: S::Node, cutoff: u32) -> WideCheck {
    let mut stack = vec![(root, 0u32)];
    let mut height = 0;
    while let Some((v, d)) = stack.pop() {
        height = height.max(d);
        if d == cutoff {
            return WideCheck {
                status: WideStatus::WideToDepth,
                component_height: cutoff,
            };
        }
        let k = src.child_count(v);
        for i in 1..k {
            stack.push((src.child(v, i), d + 1));
        }
    }
    WideCheck {
        status: WideStatus::PrunedDead,
        component_height: height,
    }
}

pub fn is_wide(tree: &TruncatedTree) -> WideStatus {
    let mut src = &tree.tree;
    wide_check(&mut src, 0, tree.depth_cutoff).status
}

/// Node ids of the pruned component, sorted.
pub fn pruned_component(tree: &PlaneTree) -> Vec<usize> {
    let mut out = vec![0];
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        for &c in tree.children(v).iter().skip(1) {
            out.push(c);
            stack.push(c);
        }
    }
    out.sort_unstable();
    out
}
