//! The particle descriptor table.
//!
//! State is stored column-wise: one `Vec` per field, indexed by the dense
//! particle id `0..n`. Density and pressure start at zero and count as unset
//! until a density pass has run.

use std::collections::BTreeMap;

use crate::{Error, Result, Vec3};

/// Names resolved to built-in columns by [`ParticleTable::scalar_field`].
/// They cannot be used for user attributes.
pub const RESERVED_FIELDS: [&str; 3] = ["mass", "density", "pressure"];

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleTable {
    mass: Vec<f64>,
    pub(crate) position: Vec<Vec3>,
    pub(crate) velocity: Vec<Vec3>,
    pub(crate) density: Vec<f64>,
    pub(crate) pressure: Vec<f64>,
    attributes: BTreeMap<String, Vec<f64>>,
}

impl ParticleTable {
    /// Builds a table from equal-length mass, position and velocity lists.
    pub fn new(masses: Vec<f64>, positions: Vec<Vec3>, velocities: Vec<Vec3>) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::Table("at least one particle is required".into()));
        }
        if positions.len() != n || velocities.len() != n {
            return Err(Error::Table(format!(
                "length mismatch: {} masses, {} positions, {} velocities",
                n,
                positions.len(),
                velocities.len()
            )));
        }
        for (i, &m) in masses.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Particle {
                    index: i,
                    reason: format!("mass must be positive and finite, got {m}"),
                });
            }
        }
        for (i, (x, v)) in positions.iter().zip(&velocities).enumerate() {
            if !x.iter().all(|c| c.is_finite()) {
                return Err(Error::Particle {
                    index: i,
                    reason: format!("non-finite position {:?}", x.as_slice()),
                });
            }
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::Particle {
                    index: i,
                    reason: format!("non-finite velocity {:?}", v.as_slice()),
                });
            }
        }
        Ok(Self {
            mass: masses,
            position: positions,
            velocity: velocities,
            density: vec![0.0; n],
            pressure: vec![0.0; n],
            attributes: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    /// Always false: construction rejects empty tables.
    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.position
    }

    pub fn velocities(&self) -> &[Vec3] {
        &self.velocity
    }

    pub fn densities(&self) -> &[f64] {
        &self.density
    }

    pub fn pressures(&self) -> &[f64] {
        &self.pressure
    }

    pub fn positions_mut(&mut self) -> &mut [Vec3] {
        &mut self.position
    }

    pub fn velocities_mut(&mut self) -> &mut [Vec3] {
        &mut self.velocity
    }

    /// Replaces the density column. Values must be finite and non-negative.
    pub fn set_densities(&mut self, values: Vec<f64>) -> Result<()> {
        self.check_column("density", &values, |v| v.is_finite() && v >= 0.0)?;
        self.density = values;
        Ok(())
    }

    /// Replaces the pressure column. Values must be finite and non-negative.
    pub fn set_pressures(&mut self, values: Vec<f64>) -> Result<()> {
        self.check_column("pressure", &values, |v| v.is_finite() && v >= 0.0)?;
        self.pressure = values;
        Ok(())
    }

    /// Sets (or overwrites) a named scalar attribute.
    pub fn set_attribute(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if name.is_empty() {
            return Err(Error::Table("attribute name must not be empty".into()));
        }
        if RESERVED_FIELDS.contains(&name) {
            return Err(Error::Table(format!("`{name}` is a reserved field name")));
        }
        self.check_column(name, &values, |_| true)?;
        self.attributes.insert(name.to_owned(), values);
        Ok(())
    }

    pub fn get_attribute(&self, name: &str) -> Result<&[f64]> {
        self.attributes
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownAttribute(name.to_owned()))
    }

    /// Attribute names in sorted order.
    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.keys().map(String::as_str)
    }

    /// Resolves `mass`, `density`, `pressure` or a user attribute.
    pub fn scalar_field(&self, name: &str) -> Result<&[f64]> {
        match name {
            "mass" => Ok(&self.mass),
            "density" => Ok(&self.density),
            "pressure" => Ok(&self.pressure),
            _ => self.get_attribute(name),
        }
    }

    /// Fails with the first particle whose density is not strictly positive.
    pub fn require_density(&self) -> Result<()> {
        match self.density.iter().position(|&r| !(r > 0.0)) {
            Some(index) => Err(Error::NonPositiveDensity {
                index,
                density: self.density[index],
            }),
            None => Ok(()),
        }
    }

    fn check_column(&self, name: &str, values: &[f64], ok: impl Fn(f64) -> bool) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Table(format!(
                "column `{name}` has {} entries, table has {}",
                values.len(),
                self.len()
            )));
        }
        if let Some(index) = values.iter().position(|&v| !ok(v)) {
            return Err(Error::Particle {
                index,
                reason: format!("invalid {name} value {}", values[index]),
            });
        }
        Ok(())
    }

    /// Rebuilds a table from raw columns, as read back from a snapshot.
    pub(crate) fn from_columns(
        mass: Vec<f64>,
        position: Vec<Vec3>,
        velocity: Vec<Vec3>,
        density: Vec<f64>,
        pressure: Vec<f64>,
        attributes: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let mut table = Self::new(mass, position, velocity)?;
        table.set_densities(density)?;
        table.set_pressures(pressure)?;
        for (name, values) in attributes {
            table.set_attribute(&name, values)?;
        }
        Ok(table)
    }

    pub(crate) fn attributes(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.attributes
    }
}

/// A timestamped copy of the full particle state.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub time: f64,
    pub table: ParticleTable,
}

impl Snapshot {
    pub fn new(step: u64, time: f64, table: ParticleTable) -> Self {
        Self { step, time, table }
    }

    /// Bitwise comparison of the full state, including NaN payloads and
    /// signed zeros.
    pub fn bit_identical(&self, other: &Snapshot) -> bool {
        fn bits(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        fn vbits(a: &[Vec3], b: &[Vec3]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| bits(x.as_slice(), y.as_slice()))
        }
        let (s, o) = (&self.table, &other.table);
        self.step == other.step
            && self.time.to_bits() == other.time.to_bits()
            && bits(&s.mass, &o.mass)
            && vbits(&s.position, &o.position)
            && vbits(&s.velocity, &o.velocity)
            && bits(&s.density, &o.density)
            && bits(&s.pressure, &o.pressure)
            && s.attributes.len() == o.attributes.len()
            && s
                .attributes
                .iter()
                .zip(&o.attributes)
                .all(|((ka, va), (kb, vb))| ka == kb && bits(va, vb))
    }
}
