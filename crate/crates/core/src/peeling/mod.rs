//! Peeling exploration of directed clusters and the height random walk it
//! produces.

mod explorer;
mod skeleton;
mod walk;

pub use explorer::{
    explore_cluster, explore_cluster_partial, explore_union, hausdorff_gap, Budgets,
    ExplorationTrace, Explorer, HausdorffGap, MultiExploreResult, StepKind, StepRecord, UnionPart,
};
pub use skeleton::{
    extract_skeleton_and_contour, walk_distance, Contour, SkeletonError, SkeletonTree,
};
pub use walk::{simulate_walk, HeightWalk, WalkSampler};
