//! Scenario documents (TOML) and the particle generators they describe.

use std::path::{Path, PathBuf};

use nalgebra::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::metric::DEFAULT_FLOOR_FRACTION;
use crate::neighbors::DEFAULT_ITERATIONS;
use crate::sph::{Eos, ExternalForce, ForceConfig, MetricMode, NeighborConfig, Pipeline, SupportRule, Viscosity};
use crate::{Error, Mat3, MetricKind, MetricTensor, ParticleTable, Result, Vec3};

/// Attribute set to 1 on periodic ghost copies and 0 elsewhere.
pub const GHOST_ATTRIBUTE: &str = "ghost";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub generator: Generator,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub neighbors: Neighbors,
    #[serde(default)]
    pub run: Run,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Lattice {
        dims: [usize; 3],
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        origin: [f64; 3],
        /// Replicate ghost particles across each face.
        #[serde(default)]
        periodic: bool,
        /// Ghost layer thickness; defaults to two lattice spacings.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ghost_width: Option<f64>,
    },
    GaussianCloud {
        count: usize,
        covariance: [[f64; 3]; 3],
        #[serde(default)]
        mean: [f64; 3],
    },
    /// Two particles at `∓separation/2` on the x axis approaching each
    /// other at `approach_speed / 2` each.
    TwoBody {
        #[serde(default = "one")]
        separation: f64,
        #[serde(default)]
        approach_speed: f64,
    },
    /// A binary snapshot, or a text export when the extension is `.csv`.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub velocity: [f64; 3],
    /// Standard deviation of Gaussian velocity noise per component.
    #[serde(default)]
    pub velocity_noise: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            mass: 1.0,
            velocity: [0.0; 3],
            velocity_noise: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default = "one")]
    pub eos_k: f64,
    #[serde(default = "five_thirds")]
    pub eos_gamma: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "two")]
    pub beta: f64,
    #[serde(default = "hundredth")]
    pub epsilon: f64,
    /// Uniform acceleration added to every particle.
    #[serde(default)]
    pub external_force: [f64; 3],
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            eos_k: 1.0,
            eos_gamma: 5.0 / 3.0,
            alpha: 1.0,
            beta: 2.0,
            epsilon: 0.01,
            external_force: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Neighbors {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    /// Covariance refinements for the adaptive Mahalanobis metric.
    #[serde(default = "default_iterations")]
    pub adaptive_iterations: usize,
    #[serde(default = "default_floor")]
    pub floor_fraction: f64,
    #[serde(default = "default_leaf")]
    pub leaf_capacity: usize,
    #[serde(default = "one")]
    pub support_scale: f64,
    #[serde(default = "default_min_support")]
    pub min_support: f64,
    /// Global covariance for the Mahalanobis metric. Without it each
    /// particle adapts its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<[[f64; 3]; 3]>,
    /// Stress tensor `T` for the stress metric (the form uses `T⁻¹`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress_tensor: Option<[[f64; 3]; 3]>,
}

impl Default for Neighbors {
    fn default() -> Self {
        Self {
            k: default_k(),
            metric: default_metric(),
            adaptive_iterations: DEFAULT_ITERATIONS,
            floor_fraction: DEFAULT_FLOOR_FRACTION,
            leaf_capacity: default_leaf(),
            support_scale: 1.0,
            min_support: default_min_support(),
            covariance: None,
            stress_tensor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Run {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_interval")]
    pub snapshot_interval: u64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for Run {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            steps: default_steps(),
            snapshot_interval: default_interval(),
            seed: 0,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn five_thirds() -> f64 {
    5.0 / 3.0
}
fn hundredth() -> f64 {
    0.01
}
fn default_k() -> usize {
    33
}
fn default_metric() -> MetricKind {
    MetricKind::Euclidean
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_floor() -> f64 {
    DEFAULT_FLOOR_FRACTION
}
fn default_leaf() -> usize {
    8
}
fn default_min_support() -> f64 {
    1e-6
}
fn default_dt() -> f64 {
    1e-3
}
fn default_steps() -> u64 {
    100
}
fn default_interval() -> u64 {
    10
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            generator: Generator::Lattice {
                dims: [8, 8, 8],
                spacing: 1.0,
                origin: [0.0; 3],
                periodic: false,
                ghost_width: None,
            },
            initial: InitialState::default(),
            physics: Physics::default(),
            neighbors: Neighbors::default(),
            run: Run::default(),
        }
    }
}

fn mat(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|r, c| rows[r][c])
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= 0, got {v}")))
    }
}

fn finite3(field: &str, v: &[f64; 3]) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::config(field, "must be finite"))
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scn: Scenario = toml::from_str(text).map_err(|e| {
            let field = match e.span() {
                Some(span) => format!("line {}", 1 + text[..span.start].matches('\n').count()),
                None => "document".into(),
            };
            Error::config(field, e.message().to_owned())
        })?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialises to TOML")
    }

    /// Checks every field constraint, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        match &self.generator {
            Generator::Lattice {
                dims,
                spacing,
                origin,
                ghost_width,
                ..
            } => {
                if dims.contains(&0) {
                    return Err(Error::config("generator.dims", "every dimension must be >= 1"));
                }
                positive("generator.spacing", *spacing)?;
                finite3("generator.origin", origin)?;
                if let Some(w) = ghost_width {
                    positive("generator.ghost_width", *w)?;
                }
            }
            Generator::GaussianCloud { count, covariance, mean } => {
                if *count == 0 {
                    return Err(Error::config("generator.count", "must be >= 1"));
                }
                finite3("generator.mean", mean)?;
                let c = mat(covariance);
                if c.iter().any(|v| !v.is_finite()) || c != c.transpose() || Cholesky::new(c).is_none() {
                    return Err(Error::config(
                        "generator.covariance",
                        "must be symmetric positive-definite",
                    ));
                }
            }
            Generator::TwoBody {
                separation,
                approach_speed,
            } => {
                positive("generator.separation", *separation)?;
                if !approach_speed.is_finite() {
                    return Err(Error::config("generator.approach_speed", "must be finite"));
                }
            }
            Generator::File { path } => {
                if path.as_os_str().is_empty() {
                    return Err(Error::config("generator.path", "must not be empty"));
                }
            }
        }

        positive("initial.mass", self.initial.mass)?;
        finite3("initial.velocity", &self.initial.velocity)?;
        non_negative("initial.velocity_noise", self.initial.velocity_noise)?;

        let p = &self.physics;
        non_negative("physics.eos_k", p.eos_k)?;
        if !(p.eos_gamma.is_finite() && p.eos_gamma >= 1.0) {
            return Err(Error::config("physics.eos_gamma", format!("must be >= 1, got {}", p.eos_gamma)));
        }
        non_negative("physics.alpha", p.alpha)?;
        non_negative("physics.beta", p.beta)?;
        positive("physics.epsilon", p.epsilon)?;
        finite3("physics.external_force", &p.external_force)?;

        let nb = &self.neighbors;
        if nb.k == 0 {
            return Err(Error::config("neighbors.k", "must be >= 1"));
        }
        if !(nb.floor_fraction > 0.0 && nb.floor_fraction <= 1.0) {
            return Err(Error::config(
                "neighbors.floor_fraction",
                format!("must lie in (0, 1], got {}", nb.floor_fraction),
            ));
        }
        if nb.leaf_capacity == 0 {
            return Err(Error::config("neighbors.leaf_capacity", "must be >= 1"));
        }
        positive("neighbors.support_scale", nb.support_scale)?;
        positive("neighbors.min_support", nb.min_support)?;
        if let Some(c) = &nb.covariance {
            MetricTensor::from_covariance(&mat(c), nb.floor_fraction)
                .map_err(|e| Error::config("neighbors.covariance", e.to_string()))?;
        }
        if let Some(t) = &nb.stress_tensor {
            MetricTensor::from_stress(&mat(t)).map_err(|e| Error::config("neighbors.stress_tensor", e.to_string()))?;
        }
        if nb.metric == MetricKind::Stress && nb.stress_tensor.is_none() {
            return Err(Error::config(
                "neighbors.stress_tensor",
                "required when neighbors.metric = \"stress\"",
            ));
        }

        let r = &self.run;
        positive("run.dt", r.dt)?;
        if r.snapshot_interval == 0 {
            return Err(Error::config("run.snapshot_interval", "must be >= 1"));
        }
        Ok(())
    }

    /// Neighbour-search mode selected by `neighbors.metric`.
    pub fn metric_mode(&self) -> Result<MetricMode> {
        let nb = &self.neighbors;
        Ok(match nb.metric {
            MetricKind::Euclidean => MetricMode::Euclidean,
            MetricKind::Mahalanobis => match &nb.covariance {
                Some(c) => MetricMode::Global(MetricTensor::from_covariance(&mat(c), nb.floor_fraction)?),
                None => MetricMode::Adaptive {
                    iterations: nb.adaptive_iterations,
                    floor_fraction: nb.floor_fraction,
                },
            },
            MetricKind::Stress => {
                let t = nb
                    .stress_tensor
                    .as_ref()
                    .ok_or_else(|| Error::config("neighbors.stress_tensor", "missing"))?;
                MetricMode::Global(MetricTensor::from_stress(&mat(t))?)
            }
        })
    }

    pub fn force_config(&self) -> ForceConfig {
        let p = &self.physics;
        let g = Vec3::from(p.external_force);
        ForceConfig {
            eos: Eos {
                k: p.eos_k,
                gamma: p.eos_gamma,
            },
            viscosity: Viscosity {
                alpha: p.alpha,
                beta: p.beta,
                epsilon: p.epsilon,
            },
            external: if g == Vec3::zeros() {
                ExternalForce::None
            } else {
                ExternalForce::Uniform(g)
            },
        }
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        let nb = &self.neighbors;
        let neighbors = NeighborConfig {
            k: nb.k,
            metric: self.metric_mode()?,
            leaf_capacity: nb.leaf_capacity,
            support: SupportRule {
                scale: nb.support_scale,
                min_length: nb.min_support,
            },
        };
        Ok(Pipeline::new(neighbors, self.force_config()))
    }

    /// Generates the initial particle table. Deterministic in `run.seed`.
    pub fn build_table(&self) -> Result<ParticleTable> {
        self.build_table_relative_to(Path::new("."))
    }

    /// As [`Scenario::build_table`], resolving a relative generator path
    /// against `base`.
    pub fn build_table_relative_to(&self, base: &Path) -> Result<ParticleTable> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
        let init = &self.initial;
        let v0 = Vec3::from(init.velocity);

        let table = match &self.generator {
            Generator::File { path } => {
                let path = if path.is_relative() { base.join(path) } else { path.clone() };
                let snap = if path.extension().is_some_and(|e| e == "csv") {
                    super::snapshot::read_text_file(&path)?
                } else {
                    super::snapshot::read_file(&path)?
                };
                return self.check_k(snap.table);
            }
            Generator::Lattice {
                dims,
                spacing,
                origin,
                periodic,
                ghost_width,
            } => {
                let o = Vec3::from(*origin);
                let mut pos = Vec::with_capacity(dims.iter().product());
                for i in 0..dims[0] {
                    for j in 0..dims[1] {
                        for k in 0..dims[2] {
                            pos.push(o + Vec3::new(i as f64, j as f64, k as f64) * *spacing);
                        }
                    }
                }
                let n = pos.len();
                let vel = self.velocities(n, v0, &mut rng)?;
                let mut table = ParticleTable::new(vec![init.mass; n], pos, vel)?;
                if *periodic {
                    let width = ghost_width.unwrap_or(2.0 * spacing);
                    let lo = o - Vec3::repeat(0.5 * spacing);
                    let len = Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * *spacing;
                    table = add_ghosts(&table, lo, len, width)?;
                }
                table
            }
            Generator::GaussianCloud { count, covariance, mean } => {
                let chol = Cholesky::new(mat(covariance))
                    .ok_or_else(|| Error::config("generator.covariance", "not positive-definite"))?;
                let l = chol.l();
                let mu = Vec3::from(*mean);
                let pos: Vec<Vec3> = (0..*count)
                    .map(|_| {
                        let z = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
                        mu + l * z
                    })
                    .collect();
                let vel = self.velocities(*count, v0, &mut rng)?;
                ParticleTable::new(vec![init.mass; *count], pos, vel)?
            }
            Generator::TwoBody {
                separation,
                approach_speed,
            } => {
                let dx = Vec3::new(0.5 * separation, 0.0, 0.0);
                let dv = Vec3::new(0.5 * approach_speed, 0.0, 0.0);
                let mut vel = self.velocities(2, v0, &mut rng)?;
                vel[0] += dv;
                vel[1] -= dv;
                ParticleTable::new(vec![init.mass; 2], vec![-dx, dx], vel)?
            }
        };
        self.check_k(table)
    }

    fn velocities(&self, n: usize, v0: Vec3, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
        let sigma = self.initial.velocity_noise;
        if sigma == 0.0 {
            return Ok(vec![v0; n]);
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::config("initial.velocity_noise", e.to_string()))?;
        Ok((0..n)
            .map(|_| v0 + Vec3::from_fn(|_, _| normal.sample(rng)))
            .collect())
    }

    fn check_k(&self, table: ParticleTable) -> Result<ParticleTable> {
        if self.neighbors.k > table.len() {
            return Err(Error::config(
                "neighbors.k",
                format!("k = {} exceeds the particle count {}", self.neighbors.k, table.len()),
            ));
        }
        Ok(table)
    }
}

/// Copies particles within `width` of each face of the box `[lo, lo + len)`
/// to the opposite side, axis by axis so edges and corners are covered.
fn add_ghosts(table: &ParticleTable, lo: Vec3, len: Vec3, width: f64) -> Result<ParticleTable> {
    let mut mass = table.masses().to_vec();
    let mut pos = table.positions().to_vec();
    let mut vel = table.velocities().to_vec();
    let mut ghost = vec![0.0; pos.len()];
    for axis in 0..3 {
        let count = pos.len();
        for i in 0..count {
            let rel = pos[i][axis] - lo[axis];
            let shifts = [
                (rel < width, len[axis]),
                (rel >= len[axis] - width, -len[axis]),
            ];
            for (hit, shift) in shifts {
                if hit {
                    let mut p = pos[i];
                    p[axis] += shift;
                    mass.push(mass[i]);
                    pos.push(p);
                    vel.push(vel[i]);
                    ghost.push(1.0);
                }
            }
        }
    }
    let mut out = ParticleTable::new(mass, pos, vel)?;
    out.set_attribute(GHOST_ATTRIBUTE, ghost)?;
    Ok(out)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml(&text)
}
