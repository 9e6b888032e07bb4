use crate::neighbors::{EffectiveNeighbors, MetricField, NeighborRelation};
use crate::{Error, KernelSpec, MetricKind, ParticleTable, Policy, Result, Vec3};

/// Kernel quantities for one ordered pair `(i, j) ∈ E`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    /// `W_ij`, evaluated with the symmetric pair spec.
    pub w: f64,
    /// `∇_i W_ij` at `x_i − x_j`.
    pub grad_w: Vec3,
    /// `q²` of the pair spec (squared separation in support units).
    pub xi: f64,
    /// Effective smoothing length of the pair spec.
    pub h: f64,
}

/// Pair terms in compressed rows, one row per particle, in the id order of
/// [`EffectiveNeighbors::neighbors`].
#[derive(Clone, Debug, PartialEq)]
pub struct PairTerms {
    offsets: Vec<usize>,
    terms: Vec<PairTerm>,
}

impl PairTerms {
    /// Evaluates `W_ij` and `∇_i W_ij` for every pair of `e`.
    ///
    /// Both `(i, j)` and `(j, i)` use `specs[i].pair(&specs[j])`, which is
    /// symmetric bit for bit, so `W_ij = W_ji` and `∇_i W_ij = −∇_j W_ji`
    /// hold exactly.
    pub fn build(
        table: &ParticleTable,
        e: &EffectiveNeighbors,
        specs: &[KernelSpec],
        policy: Policy,
    ) -> Result<Self> {
        let n = table.len();
        if e.len() != n || specs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "pair terms need {n} neighbour rows and specs, got {} and {}",
                e.len(),
                specs.len()
            )));
        }
        let pos = table.positions();
        let rows = policy.map(n, |i| {
            e.neighbors(i)
                .iter()
                .map(|&j| {
                    let spec = if i == j { specs[i] } else { specs[i].pair(&specs[j]) };
                    let dx = pos[i] - pos[j];
                    PairTerm {
                        i,
                        j,
                        w: spec.value(&dx),
                        grad_w: spec.gradient(&dx),
                        xi: spec.q_squared(&dx),
                        h: spec.effective_length(),
                    }
                })
                .collect::<Vec<_>>()
        });
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut terms = Vec::with_capacity(e.pair_count());
        for row in rows {
            terms.extend(row);
            offsets.push(terms.len());
        }
        Ok(Self { offsets, terms })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[PairTerm] {
        &self.terms[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&PairTerm> {
        let row = self.row(i);
        row.binary_search_by_key(&j, |t| t.j).ok().map(|k| &row[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = &PairTerm> {
        self.terms.iter()
    }
}

/// How kernel supports follow from the k-NN distances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportRule {
    /// Support radius as a multiple of `sqrt(ξ_max)`.
    pub scale: f64,
    /// Lower bound on the support length, used when `ξ_max = 0`
    /// (k = 1 or coincident neighbours).
    pub min_length: f64,
}

impl Default for SupportRule {
    fn default() -> Self {
        Self {
            scale: 1.0,
            min_length: 1e-6,
        }
    }
}

impl SupportRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!("support scale must be positive, got {}", self.scale)));
        }
        if !(self.min_length.is_finite() && self.min_length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "minimum support length must be positive, got {}",
                self.min_length
            )));
        }
        Ok(())
    }
}

/// Per-particle kernel specs whose support boundary passes through the k-th
/// neighbour (times `rule.scale`).
///
/// Euclidean metrics give isotropic specs with `h_i = scale · sqrt(ξ_max)`;
/// any other metric gives the anisotropic spec `M_i / (scale² ξ_max)`.
pub fn support_specs(
    rel: &NeighborRelation,
    metrics: MetricField<'_>,
    rule: SupportRule,
) -> Result<Vec<KernelSpec>> {
    rule.validate()?;
    (0..rel.len())
        .map(|i| {
            let m = metrics.get(i);
            let reach = rule.scale * rel.xi_max(i).sqrt();
            if m.kind() == MetricKind::Euclidean {
                return KernelSpec::isotropic(reach.max(rule.min_length));
            }
            // Length scale of the metric ellipsoid at ξ = reach².
            let len = reach / m.determinant().powf(1.0 / 6.0);
            let kernel_metric = if len >= rule.min_length {
                m.scaled(1.0 / (reach * reach))?
            } else {
                m.det_normalized()?.scaled(1.0 / (rule.min_length * rule.min_length))?
            };
            Ok(KernelSpec::anisotropic(&kernel_metric))
        })
        .collect()
}
