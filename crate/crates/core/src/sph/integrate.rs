use serde::{Deserialize, Serialize};

use super::pipeline::{check_len, AccelerationModel};
use crate::{Error, ParticleTable, Result, Vec3};

/// Conserved-quantity and range diagnostics after a step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: u64,
    pub time: f64,
    pub momentum: [f64; 3],
    pub kinetic_energy: f64,
    pub min_density: f64,
    pub max_density: f64,
    /// `dt / min(h / c)`; reported, never enforced.
    pub cfl: Option<f64>,
}

impl StepDiagnostics {
    pub fn measure(table: &ParticleTable, step: u64, time: f64, cfl: Option<f64>) -> Self {
        let mut p = Vec3::zeros();
        let mut ke = 0.0;
        for (m, v) in table.masses().iter().zip(table.velocities()) {
            p += v * *m;
            ke += 0.5 * m * v.norm_squared();
        }
        let (lo, hi) = table
            .densities()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        Self {
            step,
            time,
            momentum: [p[0], p[1], p[2]],
            kinetic_energy: ke,
            min_density: lo,
            max_density: hi,
            cfl,
        }
    }
}

/// One kick-drift-kick leapfrog step.
///
/// ```text
/// v½ = v + (dt/2) a(x)
/// x' = x + dt v½
/// v' = v½ + (dt/2) a(x')
/// ```
///
/// `a(x')` is evaluated with the half-step velocities. `step` is the index
/// of the step being taken (reported on failure); `time` is the time at its
/// start.
pub fn step<M: AccelerationModel + ?Sized>(
    table: &mut ParticleTable,
    model: &mut M,
    dt: f64,
    step: u64,
    time: f64,
) -> Result<StepDiagnostics> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let half = 0.5 * dt;

    let a0 = model.accelerations(table)?;
    check_len(table, &a0)?;
    for (v, a) in table.velocity.iter_mut().zip(&a0) {
        *v += a * half;
    }
    for (x, v) in table.position.iter_mut().zip(&table.velocity) {
        *x += v * dt;
    }
    check_finite(table, step)?;

    let a1 = model.accelerations(table)?;
    check_len(table, &a1)?;
    for (v, a) in table.velocity.iter_mut().zip(&a1) {
        *v += a * half;
    }
    check_finite(table, step)?;

    let cfl = model.signal_time().map(|t| dt / t);
    Ok(StepDiagnostics::measure(table, step + 1, time + dt, cfl))
}

fn check_finite(table: &ParticleTable, step: u64) -> Result<()> {
    let bad = |v: &Vec3| !v.iter().all(|c| c.is_finite());
    if let Some(i) = table.position.iter().position(bad) {
        return Err(Error::Numeric {
            step,
            reason: format!("position of particle {i} is not finite"),
        });
    }
    if let Some(i) = table.velocity.iter().position(bad) {
        return Err(Error::Numeric {
            step,
            reason: format!("velocity of particle {i} is not finite"),
        });
    }
    Ok(())
}
