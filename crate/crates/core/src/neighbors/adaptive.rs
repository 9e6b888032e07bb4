use super::{knn_query, MetricField, Neighbor, NeighborRelation, Octree};
use crate::metric::{estimate_covariance, invert_spd};
use crate::{Mat3, MetricTensor, ParticleTable, Policy, Result};

/// Default number of covariance refinements after the Euclidean pass.
pub const DEFAULT_ITERATIONS: usize = 2;

/// Result of the covariance-adapted neighbour search.
#[derive(Clone, Debug)]
pub struct AdaptiveNeighbors {
    /// Unit-determinant metric per particle.
    pub metrics: Vec<MetricTensor>,
    pub relation: NeighborRelation,
}

/// Adapts the metric of a single particle.
///
/// Starts from the Euclidean k-NN set; each iteration takes the second
/// moments of the current neighbours about `x_i` (self excluded), inverts
/// them with eigenvalue flooring, rescales to `det M = 1` and queries again.
pub fn adaptive_metric_at(
    tree: &Octree,
    table: &ParticleTable,
    i: usize,
    k: usize,
    iterations: usize,
    floor_fraction: f64,
) -> Result<(MetricTensor, Vec<Neighbor>)> {
    let mut metric = MetricTensor::euclidean();
    let mut list = knn_query(tree, table, i, k, &metric)?;
    let pos = table.positions();
    for _ in 0..iterations {
        let others: Vec<_> = list.iter().filter(|nb| nb.id != i).map(|nb| pos[nb.id]).collect();
        let cov = if others.is_empty() {
            Mat3::zeros()
        } else {
            estimate_covariance(&pos[i], &others)?
        };
        metric = invert_spd(&cov, floor_fraction)?.det_normalized()?;
        list = knn_query(tree, table, i, k, &metric)?;
    }
    Ok((metric, list))
}

/// Per-particle adapted metrics and the k-NN relation they induce.
pub fn adaptive_metric_knn(
    tree: &Octree,
    table: &ParticleTable,
    k: usize,
    iterations: usize,
    floor_fraction: f64,
    policy: Policy,
) -> Result<AdaptiveNeighbors> {
    let per = policy.try_map(table.len(), |i| {
        adaptive_metric_at(tree, table, i, k, iterations, floor_fraction)
    })?;
    let (metrics, lists): (Vec<_>, Vec<_>) = per.into_iter().unzip();
    Ok(AdaptiveNeighbors {
        metrics,
        relation: NeighborRelation::from_lists(k, lists)?,
    })
}

/// Convenience for callers that already hold adapted metrics.
pub fn relation_for(
    tree: &Octree,
    table: &ParticleTable,
    k: usize,
    metrics: &[MetricTensor],
    policy: Policy,
) -> Result<NeighborRelation> {
    super::knn_all(tree, table, k, MetricField::PerParticle(metrics), policy)
}
