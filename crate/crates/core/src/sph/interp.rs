use super::PairTerms;
use crate::{Error, ParticleTable, Policy, Result, Vec3};

fn check_rows(table: &ParticleTable, pairs: &PairTerms) -> Result<()> {
    if pairs.len() != table.len() {
        return Err(Error::InvalidArgument(format!(
            "pair terms cover {} particles, table has {}",
            pairs.len(),
            table.len()
        )));
    }
    Ok(())
}

fn check_index(table: &ParticleTable, i: usize) -> Result<()> {
    if i >= table.len() {
        return Err(Error::InvalidArgument(format!("particle id {i} out of range")));
    }
    Ok(())
}

fn volume(table: &ParticleTable, j: usize) -> Result<f64> {
    let rho = table.densities()[j];
    if rho > 0.0 {
        Ok(table.masses()[j] / rho)
    } else {
        Err(Error::NonPositiveDensity { index: j, density: rho })
    }
}

/// `Ã_i = Σ_{j∈E(i)} W_ij A_j m_j / ρ_j`.
pub fn interpolate_scalar(table: &ParticleTable, pairs: &PairTerms, attr: &str, i: usize) -> Result<f64> {
    check_rows(table, pairs)?;
    check_index(table, i)?;
    let a = table.scalar_field(attr)?;
    pairs
        .row(i)
        .iter()
        .try_fold(0.0, |acc, t| Ok(acc + t.w * a[t.j] * volume(table, t.j)?))
}

/// `∇Ã_i = Σ_{j∈E(i)} ∇_i W_ij A_j m_j / ρ_j`.
pub fn interpolate_gradient(table: &ParticleTable, pairs: &PairTerms, attr: &str, i: usize) -> Result<Vec3> {
    check_rows(table, pairs)?;
    check_index(table, i)?;
    let a = table.scalar_field(attr)?;
    pairs
        .row(i)
        .iter()
        .try_fold(Vec3::zeros(), |acc, t| Ok(acc + t.grad_w * (a[t.j] * volume(table, t.j)?)))
}

/// `ρ_i = Σ_{j∈E(i)} W_ij m_j`. The self term keeps every result positive.
pub fn compute_density(table: &ParticleTable, pairs: &PairTerms, policy: Policy) -> Result<Vec<f64>> {
    check_rows(table, pairs)?;
    let m = table.masses();
    Ok(policy.map(table.len(), |i| pairs.row(i).iter().map(|t| t.w * m[t.j]).sum()))
}
