use std::fmt;
use std::sync::Arc;

use super::{PairTerm, PairTerms};
use crate::{Error, ParticleTable, Policy, Result, Vec3};

/// Barotropic closure `P = K ρ^γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eos {
    pub k: f64,
    pub gamma: f64,
}

impl Default for Eos {
    fn default() -> Self {
        Self { k: 1.0, gamma: 5.0 / 3.0 }
    }
}

impl Eos {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::InvalidArgument(format!("EOS constant K must be >= 0, got {}", self.k)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 1.0) {
            return Err(Error::InvalidArgument(format!("EOS exponent must be >= 1, got {}", self.gamma)));
        }
        Ok(())
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        if self.k == 0.0 {
            0.0
        } else {
            self.k * rho.powf(self.gamma)
        }
    }

    /// `c = sqrt(γ P / ρ)`.
    #[inline]
    pub fn sound_speed(&self, rho: f64, p: f64) -> f64 {
        (self.gamma * p / rho).sqrt()
    }
}

/// Monaghan artificial viscosity coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viscosity {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for Viscosity {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            epsilon: 0.01,
        }
    }
}

impl Viscosity {
    pub fn off() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            ..Self::default()
        }
    }

    pub fn is_off(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.epsilon > 0.0)
            || !(self.alpha.is_finite() && self.beta.is_finite() && self.epsilon.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "viscosity needs alpha >= 0, beta >= 0, epsilon > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Non-hydrodynamic acceleration added verbatim to `dv/dt`.
#[derive(Clone, Default)]
pub enum ExternalForce {
    #[default]
    None,
    Uniform(Vec3),
    Field(Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>),
}

impl fmt::Debug for ExternalForce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("None"),
            Self::Uniform(g) => f.debug_tuple("Uniform").field(g).finish(),
            Self::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl ExternalForce {
    #[inline]
    pub fn at(&self, x: &Vec3) -> Vec3 {
        match self {
            Self::None => Vec3::zeros(),
            Self::Uniform(g) => *g,
            Self::Field(f) => f(x),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ForceConfig {
    pub eos: Eos,
    pub viscosity: Viscosity,
    pub external: ExternalForce,
}

impl ForceConfig {
    pub fn validate(&self) -> Result<()> {
        self.eos.validate()?;
        self.viscosity.validate()
    }
}

/// `P_i = K ρ_i^γ` for every particle.
pub fn apply_eos(table: &ParticleTable, eos: &Eos) -> Result<Vec<f64>> {
    eos.validate()?;
    table.require_density()?;
    Ok(table.densities().iter().map(|&rho| eos.pressure(rho)).collect())
}

/// Symmetric pair factor `P_i/ρ_i² + P_j/ρ_j² + π_ij`.
///
/// `π_ij` is zero for separating pairs and `(−α c̄ μ + β μ²) / ρ̄` otherwise,
/// with `μ = h̄ (v_ij·x_ij) / (|x_ij|² + ε h̄²)`.
#[inline]
pub fn pressure_factor(table: &ParticleTable, cfg: &ForceConfig, t: &PairTerm) -> f64 {
    let (i, j) = (t.i, t.j);
    let rho = table.densities();
    let p = table.pressures();
    let base = p[i] / (rho[i] * rho[i]) + p[j] / (rho[j] * rho[j]);
    let visc = &cfg.viscosity;
    if visc.is_off() {
        return base;
    }
    let x = table.positions();
    let v = table.velocities();
    let dx = x[i] - x[j];
    let vr = (v[i] - v[j]).dot(&dx);
    if vr >= 0.0 {
        return base;
    }
    let h = t.h;
    let mu = h * vr / (dx.norm_squared() + visc.epsilon * h * h);
    let c = 0.5 * (cfg.eos.sound_speed(rho[i], p[i]) + cfg.eos.sound_speed(rho[j], p[j]));
    let rho_bar = 0.5 * (rho[i] + rho[j]);
    base + (-visc.alpha * c * mu + visc.beta * mu * mu) / rho_bar
}

/// `dv_i/dt = −Σ_{j∈E(i)} m_j Π_ij ∇_i W_ij + F_i`.
pub fn compute_forces(table: &ParticleTable, pairs: &PairTerms, cfg: &ForceConfig, policy: Policy) -> Result<Vec<Vec3>> {
    cfg.validate()?;
    table.require_density()?;
    if let Some(i) = table.pressures().iter().position(|p| !p.is_finite()) {
        return Err(Error::Particle {
            index: i,
            reason: "pressure is not finite".into(),
        });
    }
    if pairs.len() != table.len() {
        return Err(Error::InvalidArgument("pair terms do not match the table".into()));
    }
    let m = table.masses();
    let x = table.positions();
    Ok(policy.map(table.len(), |i| {
        let mut acc = Vec3::zeros();
        for t in pairs.row(i) {
            if t.j == i {
                continue;
            }
            acc -= t.grad_w * (m[t.j] * pressure_factor(table, cfg, t));
        }
        acc + cfg.external.at(&x[i])
    }))
}
