//! Cubic B-spline smoothing kernel with compact support.
//!
//! With `q ∈ [0, 1]` the normalised support coordinate,
//!
//! ```text
//! W = C (1 − 6q² + 6q³)   0 ≤ q ≤ 1/2
//! W = C 2 (1 − q)³        1/2 < q ≤ 1
//! W = 0                   q > 1
//! ```
//!
//! Isotropic support uses `q = r / h` and `C = 8 / (π h³)`. Anisotropic
//! support uses `q² = Δx M Δxᵀ` and `C = 8 √det M / π`, which keeps
//! `∫ W dV = 1` for any SPD `M`.

use std::f64::consts::PI;

use crate::metric::{form, SymmetricEigen3};
use crate::{Error, Mat3, MetricTensor, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Isotropic {
        h: f64,
    },
    Anisotropic {
        /// Quadratic form with the support boundary at `q = 1`.
        metric: Mat3,
        /// `M⁻¹`, kept for pair averaging.
        support: Mat3,
        norm: f64,
    },
}

impl KernelSpec {
    pub fn isotropic(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("smoothing length must be positive, got {h}")));
        }
        Ok(Self::Isotropic { h })
    }

    /// Support is the unit level set `Δx M Δxᵀ = 1`.
    pub fn anisotropic(metric: &MetricTensor) -> Self {
        let eig = metric.eigen();
        Self::Anisotropic {
            metric: *metric.matrix(),
            support: eig.reconstruct(|l| 1.0 / l),
            norm: 8.0 * metric.determinant().sqrt() / PI,
        }
    }

    /// Normalisation constant `C`, equal to `W(0)`.
    pub fn norm(&self) -> f64 {
        match *self {
            Self::Isotropic { h } => 8.0 / (PI * h * h * h),
            Self::Anisotropic { norm, .. } => norm,
        }
    }

    /// Length scale with the same support volume: `h` itself, or
    /// `det(M)^(-1/6)`.
    pub fn effective_length(&self) -> f64 {
        match *self {
            Self::Isotropic { h } => h,
            Self::Anisotropic { norm, .. } => (8.0 / (PI * norm)).cbrt(),
        }
    }

    /// `q²` at separation `dx`.
    #[inline]
    pub fn q_squared(&self, dx: &Vec3) -> f64 {
        match self {
            Self::Isotropic { h } => dx.norm_squared() / (h * h),
            Self::Anisotropic { metric, .. } => form(metric, dx),
        }
    }

    /// `W(dx)` without input validation.
    #[inline]
    pub fn value(&self, dx: &Vec3) -> f64 {
        profile(self.q_squared(dx).sqrt()) * self.norm()
    }

    /// `∇ W` with respect to `x_i` at `dx = x_i − x_j`, without validation.
    #[inline]
    pub fn gradient(&self, dx: &Vec3) -> Vec3 {
        let q = self.q_squared(dx).sqrt();
        let g = profile_slope_over_q(q) * self.norm();
        if g == 0.0 {
            return Vec3::zeros();
        }
        match self {
            Self::Isotropic { h } => dx * (g / (h * h)),
            Self::Anisotropic { metric, .. } => metric * dx * g,
        }
    }

    pub fn kernel_value(&self, dx: &Vec3) -> Result<f64> {
        check(dx)?;
        Ok(self.value(dx))
    }

    pub fn kernel_gradient(&self, dx: &Vec3) -> Result<Vec3> {
        check(dx)?;
        Ok(self.gradient(dx))
    }

    /// Symmetric pair spec: mean smoothing length for isotropic pairs;
    /// for anisotropic ones the inverse of the mean support tensor, scaled
    /// so its effective length is the mean of the two.
    pub fn pair(&self, other: &Self) -> Self {
        match (self, other) {
            (Self::Isotropic { h: a }, Self::Isotropic { h: b }) => Self::Isotropic { h: 0.5 * (a + b) },
            _ => {
                let s = (self.support_tensor() + other.support_tensor()) * 0.5;
                let target = 0.5 * (self.effective_length() + other.effective_length());
                let eig = SymmetricEigen3::new(&s);
                let det_s: f64 = eig.values.iter().product();
                // det M = 1/det S; rescale S so that det(S)^(1/6) = target
                let c = target * target / det_s.cbrt();
                let support = eig.reconstruct(|l| l * c);
                let metric = eig.reconstruct(|l| 1.0 / (l * c));
                let det_m: f64 = eig.values.iter().map(|l| 1.0 / (l * c)).product();
                Self::Anisotropic {
                    metric,
                    support,
                    norm: 8.0 * det_m.sqrt() / PI,
                }
            }
        }
    }

    fn support_tensor(&self) -> Mat3 {
        match *self {
            Self::Isotropic { h } => Mat3::identity() * (h * h),
            Self::Anisotropic { support, .. } => support,
        }
    }
}

fn check(dx: &Vec3) -> Result<()> {
    if dx.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("kernel separation".into()))
    }
}

/// Unnormalised radial profile.
#[inline]
pub(crate) fn profile(q: f64) -> f64 {
    if q <= 0.5 {
        1.0 - 6.0 * q * q + 6.0 * q * q * q
    } else if q <= 1.0 {
        let t = 1.0 - q;
        2.0 * t * t * t
    } else {
        0.0
    }
}

/// `(dW/dq) / q` of the unnormalised profile; finite at `q = 0`.
#[inline]
fn profile_slope_over_q(q: f64) -> f64 {
    if q == 0.0 {
        0.0
    } else if q <= 0.5 {
        -12.0 + 18.0 * q
    } else if q < 1.0 {
        let t = 1.0 - q;
        -6.0 * t * t / q
    } else {
        0.0
    }
}
