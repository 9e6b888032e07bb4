//! Spatial index and neighbour relations.
//!
//! One Euclidean octree serves every metric. Anisotropy enters the search
//! only through the pruning bound `λ_min(M) · d_box²`, which is a lower bound
//! on `ξ` for any point in a box, so results are exact for any SPD metric.

mod adaptive;
mod closure;
mod knn;
mod octree;

pub use adaptive::{
    adaptive_metric_at, adaptive_metric_knn, relation_for, AdaptiveNeighbors, DEFAULT_ITERATIONS,
};
pub use closure::{symmetric_closure, EffectiveNeighbors};
pub use knn::{brute_force_query, knn_all, knn_query, MetricField, Neighbor, NeighborRelation};
pub use octree::{Cell, Octree};
