//! The half-plane model: explicit and lazy map representations, the
//! percolation overlay and the brute-force cluster oracle.

mod cluster;
mod layered;
mod lazymap;
mod overlay;

pub use cluster::{bfs_cluster, bfs_cluster_multi, reaches_level, ClusterStats, Probe};
pub use layered::{LayeredError, LayeredMap};
pub use lazymap::{LazyMap, MapSnapshot, SnapshotVertex, Topology, VertexId};
pub use overlay::{DirectedEdge, OverlayMode, PercolationOverlay};
