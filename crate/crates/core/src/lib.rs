//! Smoothed particle hydrodynamics driven by anisotropic k-nearest-neighbour
//! search.
//!
//! The crate is organised the way a simulation step flows:
//!
//! - [`particles`] holds the descriptor table (mass, position, velocity,
//!   density, pressure and named scalar attributes) as parallel columns.
//! - [`metric`] defines quadratic-form distances `ξ = Δx M Δxᵀ`, covariance
//!   estimation and regularised SPD inversion.
//! - [`neighbors`] builds an octree, answers exact k-NN queries under any
//!   metric and forms the symmetric closure of the k-NN relation.
//! - [`kernel`] is the cubic B-spline smoothing kernel in isotropic and
//!   metric-adapted form.
//! - [`sph`] evaluates interpolants, densities, pressure forces and advances
//!   the state with a kick-drift-kick leapfrog.
//! - [`io`] loads scenarios, runs them and persists snapshot histories.
//!
//! Bulk passes run on rayon when the `parallel` feature is enabled (the
//! default); see [`exec::Policy`].

pub mod error;
pub mod exec;
pub mod io;
pub mod kernel;
pub mod metric;
pub mod neighbors;
pub mod particles;
pub mod sph;

pub use error::{Error, Result};
pub use exec::Policy;
pub use kernel::KernelSpec;
pub use metric::{Ellipsoid, MetricKind, MetricTensor};
pub use neighbors::{EffectiveNeighbors, NeighborRelation, Octree};
pub use particles::{ParticleTable, Snapshot};

/// Three-component vector used for positions, velocities and accelerations.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix used for metric and covariance tensors.
pub type Mat3 = nalgebra::Matrix3<f64>;
