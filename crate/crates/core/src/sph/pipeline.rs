use super::{apply_eos, compute_density, compute_forces, support_specs, ForceConfig, PairTerms, SupportRule};
use crate::neighbors::{
    adaptive_metric_knn, knn_all, symmetric_closure, EffectiveNeighbors, MetricField, NeighborRelation, Octree,
    DEFAULT_ITERATIONS,
};
use crate::metric::DEFAULT_FLOOR_FRACTION;
use crate::{Error, KernelSpec, MetricTensor, ParticleTable, Policy, Result, Vec3};

/// Which metric drives the neighbour search.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricMode {
    Euclidean,
    /// One fixed metric for every particle (a global covariance or stress
    /// tensor).
    Global(MetricTensor),
    /// Per-particle covariance-adapted metrics.
    Adaptive { iterations: usize, floor_fraction: f64 },
}

impl MetricMode {
    pub fn adaptive() -> Self {
        Self::Adaptive {
            iterations: DEFAULT_ITERATIONS,
            floor_fraction: DEFAULT_FLOOR_FRACTION,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborConfig {
    pub k: usize,
    pub metric: MetricMode,
    pub leaf_capacity: usize,
    pub support: SupportRule,
}

impl Default for NeighborConfig {
    fn default() -> Self {
        Self {
            k: 33,
            metric: MetricMode::Euclidean,
            leaf_capacity: 8,
            support: SupportRule::default(),
        }
    }
}

/// Everything derived from one neighbour rebuild.
#[derive(Clone, Debug)]
pub struct NeighborState {
    pub tree: Octree,
    pub metrics: Vec<MetricTensor>,
    pub relation: NeighborRelation,
    pub effective: EffectiveNeighbors,
    pub specs: Vec<KernelSpec>,
    pub pairs: PairTerms,
}

/// The per-step sense/act sequence: neighbours → pair terms → density →
/// EOS → forces.
#[derive(Clone, Debug, Default)]
pub struct Pipeline {
    pub neighbors: NeighborConfig,
    pub forces: ForceConfig,
    pub policy: Policy,
}

impl Pipeline {
    pub fn new(neighbors: NeighborConfig, forces: ForceConfig) -> Self {
        Self {
            neighbors,
            forces,
            policy: Policy::default(),
        }
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    /// Rebuilds the index, the (adapted) k-NN relation, its closure and the
    /// pair terms at the current positions.
    pub fn neighbors(&self, table: &ParticleTable) -> Result<NeighborState> {
        let cfg = &self.neighbors;
        let tree = Octree::build(table, cfg.leaf_capacity)?;
        let (metrics, relation) = match &cfg.metric {
            MetricMode::Euclidean => {
                let m = MetricTensor::euclidean();
                let rel = knn_all(&tree, table, cfg.k, MetricField::Global(&m), self.policy)?;
                (vec![m; table.len()], rel)
            }
            MetricMode::Global(m) => {
                let rel = knn_all(&tree, table, cfg.k, MetricField::Global(m), self.policy)?;
                (vec![*m; table.len()], rel)
            }
            MetricMode::Adaptive {
                iterations,
                floor_fraction,
            } => {
                let a = adaptive_metric_knn(&tree, table, cfg.k, *iterations, *floor_fraction, self.policy)?;
                (a.metrics, a.relation)
            }
        };
        let effective = symmetric_closure(&relation);
        let specs = support_specs(&relation, MetricField::PerParticle(&metrics), cfg.support)?;
        let pairs = PairTerms::build(table, &effective, &specs, self.policy)?;
        Ok(NeighborState {
            tree,
            metrics,
            relation,
            effective,
            specs,
            pairs,
        })
    }

    /// Neighbours, density and EOS; stores ρ and P in the table.
    pub fn density_pass(&self, table: &mut ParticleTable) -> Result<NeighborState> {
        let state = self.neighbors(table)?;
        let rho = compute_density(table, &state.pairs, self.policy)?;
        table.set_densities(rho)?;
        let p = apply_eos(table, &self.forces.eos)?;
        table.set_pressures(p)?;
        Ok(state)
    }
}

/// Source of accelerations for the integrator.
pub trait AccelerationModel {
    /// Accelerations at the table's current state. May update derived
    /// columns (density, pressure) in place.
    fn accelerations(&mut self, table: &mut ParticleTable) -> Result<Vec<Vec3>>;

    /// Smallest `h / c` seen in the last evaluation, if the model has a
    /// sound speed.
    fn signal_time(&self) -> Option<f64> {
        None
    }
}

/// [`Pipeline`] with the bookkeeping needed for step diagnostics.
#[derive(Clone, Debug)]
pub struct SphModel {
    pub pipeline: Pipeline,
    last_signal_time: Option<f64>,
}

impl SphModel {
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            pipeline,
            last_signal_time: None,
        }
    }
}

impl AccelerationModel for SphModel {
    fn accelerations(&mut self, table: &mut ParticleTable) -> Result<Vec<Vec3>> {
        let state = self.pipeline.density_pass(table)?;
        let eos = &self.pipeline.forces.eos;
        let min_ratio = state
            .specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let c = eos.sound_speed(table.densities()[i], table.pressures()[i]);
                s.effective_length() / c
            })
            .fold(f64::INFINITY, f64::min);
        self.last_signal_time = min_ratio.is_finite().then_some(min_ratio);
        compute_forces(table, &state.pairs, &self.pipeline.forces, self.pipeline.policy)
    }

    fn signal_time(&self) -> Option<f64> {
        self.last_signal_time
    }
}

/// Any closure `table -> accelerations` can drive the integrator.
impl<F> AccelerationModel for F
where
    F: FnMut(&mut ParticleTable) -> Result<Vec<Vec3>>,
{
    fn accelerations(&mut self, table: &mut ParticleTable) -> Result<Vec<Vec3>> {
        self(table)
    }
}

pub(crate) fn check_len(table: &ParticleTable, acc: &[Vec3]) -> Result<()> {
    if acc.len() != table.len() {
        return Err(Error::InvalidArgument(format!(
            "model returned {} accelerations for {} particles",
            acc.len(),
            table.len()
        )));
    }
    Ok(())
}
