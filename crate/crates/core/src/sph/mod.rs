//! Kernel interpolation, density, pressure forces and time integration.
//!
//! All sums run over the effective neighbours `E(i)` (the symmetric
//! closure), never over the raw k-NN lists.

mod force;
mod integrate;
mod interp;
mod pairs;
mod pipeline;

pub use force::{apply_eos, compute_forces, pressure_factor, Eos, ExternalForce, ForceConfig, Viscosity};
pub use integrate::{step, StepDiagnostics};
pub use interp::{compute_density, interpolate_gradient, interpolate_scalar};
pub use pairs::{support_specs, PairTerm, PairTerms, SupportRule};
pub use pipeline::{AccelerationModel, MetricMode, NeighborConfig, NeighborState, Pipeline, SphModel};
