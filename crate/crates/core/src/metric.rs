//! Quadratic-form distances and the tensors that define them.
//!
//! A [`MetricTensor`] stores the *inverse* tensor `M` (Σ⁻¹ for a covariance,
//! T⁻¹ for a stress tensor) so that `ξ = Δx M Δxᵀ`. `ξ` is a squared
//! distance; every ordering comparison uses it directly.

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// Relative tolerance on `|M - Mᵀ|` accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default eigenvalue floor, as a fraction of the largest eigenvalue.
pub const DEFAULT_FLOOR_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Mahalanobis,
    Stress,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "mahalanobis" => Ok(Self::Mahalanobis),
            "stress" => Ok(Self::Stress),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Euclidean => "euclidean",
            Self::Mahalanobis => "mahalanobis",
            Self::Stress => "stress",
        })
    }
}

/// Eigendecomposition of a symmetric 3×3 matrix.
///
/// Eigenvalues are sorted descending; `vectors[a]` pairs with `values[a]`.
/// Each eigenvector is unit length with its largest-magnitude component
/// positive (first such component on ties).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricEigen3 {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

impl SymmetricEigen3 {
    /// Cyclic Jacobi rotations until the off-diagonal part vanishes to
    /// machine precision.
    pub fn new(m: &Mat3) -> Self {
        let mut a = [[0.0f64; 3]; 3];
        for (r, row) in a.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = 0.5 * (m[(r, c)] + m[(c, r)]);
            }
        }
        let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

        for _sweep in 0..64 {
            let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
            let diag = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
            if off == 0.0 || off <= f64::EPSILON * 1e-3 * diag {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }

        let mut order = [0usize, 1, 2];
        order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]).then(x.cmp(&y)));
        let values = order.map(|i| a[i][i]);
        let vectors = order.map(|i| canonical_sign(Vec3::new(v[0][i], v[1][i], v[2][i]).normalize()));
        Self { values, vectors }
    }

    /// Reassembles `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> Mat3 {
        let mut out = Mat3::zeros();
        for a in 0..3 {
            let e = self.vectors[a];
            out += f(self.values[a]) * e * e.transpose();
        }
        symmetrize(&out)
    }
}

fn canonical_sign(v: Vec3) -> Vec3 {
    let mut best = 0;
    for c in 1..3 {
        if v[c].abs() > v[best].abs() {
            best = c;
        }
    }
    if v[best] < 0.0 {
        -v
    } else {
        v
    }
}

fn symmetrize(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(m: &Mat3) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Metric("matrix has non-finite entries".into()));
    }
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Metric(format!(
            "matrix is not symmetric (max |M - Mᵀ| = {asym:e}, scale {scale:e})"
        )));
    }
    Ok(())
}

/// A symmetric positive-definite quadratic form defining `ξ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricTensor {
    matrix: Mat3,
    kind: MetricKind,
    eigen: SymmetricEigen3,
}

impl MetricTensor {
    pub fn euclidean() -> Self {
        let matrix = Mat3::identity();
        Self {
            matrix,
            kind: MetricKind::Euclidean,
            eigen: SymmetricEigen3::new(&matrix),
        }
    }

    /// Validates `matrix` (already the inverse tensor) as a metric.
    pub fn new(matrix: Mat3, kind: MetricKind) -> Result<Self> {
        check_symmetric(&matrix)?;
        if kind == MetricKind::Euclidean && matrix != Mat3::identity() {
            return Err(Error::Metric("euclidean metric must be the identity".into()));
        }
        let matrix = symmetrize(&matrix);
        let eigen = SymmetricEigen3::new(&matrix);
        if !(eigen.values[2] > 0.0) {
            return Err(Error::Metric(format!(
                "matrix is not positive-definite (eigenvalues {:?})",
                eigen.values
            )));
        }
        Ok(Self {
            matrix,
            kind,
            eigen,
        })
    }

    /// Stress-tensor metric: the form uses `T⁻¹` for a caller-supplied SPD `T`.
    pub fn from_stress(stress: &Mat3) -> Result<Self> {
        check_symmetric(stress)?;
        let eig = SymmetricEigen3::new(stress);
        if !(eig.values[2] > 0.0) {
            return Err(Error::Metric(format!(
                "stress tensor is not positive-definite (eigenvalues {:?})",
                eig.values
            )));
        }
        Self::new(eig.reconstruct(|l| 1.0 / l), MetricKind::Stress)
    }

    /// Mahalanobis metric `Σ⁻¹` from a covariance, regularised by
    /// [`invert_spd`].
    pub fn from_covariance(cov: &Mat3, floor_fraction: f64) -> Result<Self> {
        invert_spd(cov, floor_fraction)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// Eigenvalues descending with canonical eigenvectors.
    pub fn eigen(&self) -> &SymmetricEigen3 {
        &self.eigen
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen.values[2]
    }

    pub fn determinant(&self) -> f64 {
        self.eigen.values.iter().product()
    }

    /// `c·M` for `c > 0`; keeps the kind unless scaling an identity.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("metric scale must be positive, got {c}")));
        }
        let kind = match self.kind {
            MetricKind::Euclidean if c != 1.0 => MetricKind::Mahalanobis,
            k => k,
        };
        Self::new(self.matrix * c, kind)
    }

    /// Rescales so that `det M = 1`.
    pub fn det_normalized(&self) -> Result<Self> {
        let det = self.determinant();
        if det == 1.0 {
            return Ok(*self);
        }
        self.scaled(det.powf(-1.0 / 3.0))
    }

    /// `ξ = (a − b) M (a − b)ᵀ` without input validation.
    #[inline]
    pub fn distance_sq(&self, a: &Vec3, b: &Vec3) -> f64 {
        form(&self.matrix, &(a - b))
    }

    /// `ξ` between two points; rejects non-finite input.
    pub fn quadratic_distance(&self, a: &Vec3, b: &Vec3) -> Result<f64> {
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("quadratic_distance input".into()));
        }
        Ok(self.distance_sq(a, b))
    }
}

/// `d M dᵀ` written out so that `d` and `−d` give bit-identical results.
#[inline]
pub(crate) fn form(m: &Mat3, d: &Vec3) -> f64 {
    let (x, y, z) = (d[0], d[1], d[2]);
    m[(0, 0)] * x * x
        + m[(1, 1)] * y * y
        + m[(2, 2)] * z * z
        + 2.0 * (m[(0, 1)] * x * y + m[(0, 2)] * x * z + m[(1, 2)] * y * z)
}

/// Biased second-moment tensor of `positions` about `center`.
pub fn estimate_covariance(center: &Vec3, positions: &[Vec3]) -> Result<Mat3> {
    if positions.is_empty() {
        return Err(Error::InvalidArgument("covariance needs at least one position".into()));
    }
    let mut sum = Mat3::zeros();
    for p in positions {
        let d = p - center;
        sum += d * d.transpose();
    }
    Ok(symmetrize(&(sum / positions.len() as f64)))
}

/// Inverts a symmetric positive-semidefinite matrix with eigenvalue flooring.
///
/// Eigenvalues below `floor_fraction · λ_max` are raised to that floor before
/// inversion. A zero matrix maps to the identity metric.
pub fn invert_spd(s: &Mat3, floor_fraction: f64) -> Result<MetricTensor> {
    if !(floor_fraction > 0.0 && floor_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "floor_fraction must lie in (0, 1], got {floor_fraction}"
        )));
    }
    check_symmetric(s)?;
    let eig = SymmetricEigen3::new(s);
    let lmax = eig.values[0];
    if !(lmax > 0.0) {
        let mut m = MetricTensor::euclidean();
        m.kind = MetricKind::Mahalanobis;
        return Ok(m);
    }
    let floor = floor_fraction * lmax;
    MetricTensor::new(eig.reconstruct(|l| 1.0 / l.max(floor)), MetricKind::Mahalanobis)
}

/// Level set `{x : (x − c) M (x − c)ᵀ = ξ_max}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    pub center: Vec3,
    /// Unit principal axes, longest first.
    pub axes: [Vec3; 3],
    /// Semi-axis lengths, descending.
    pub semi_axes: [f64; 3],
}

impl Ellipsoid {
    /// True when `p` lies inside or on the surface, with a relative slack
    /// for rounding.
    pub fn contains(&self, p: &Vec3) -> bool {
        let d = p - self.center;
        let s: f64 = (0..3)
            .map(|a| {
                let t = d.dot(&self.axes[a]) / self.semi_axes[a];
                t * t
            })
            .sum();
        s <= 1.0 + 1e-9
    }
}

/// Bounding ellipsoid of a k-NN set: axes are `M`'s eigenvectors and the
/// semi-axis along eigenvalue `λ` is `sqrt(ξ_max / λ)`.
pub fn neighbor_ellipsoid(m: &MetricTensor, center: &Vec3, xi_max: f64) -> Result<Ellipsoid> {
    if !(xi_max.is_finite() && xi_max > 0.0) {
        return Err(Error::InvalidArgument(format!("xi_max must be positive, got {xi_max}")));
    }
    let eig = m.eigen();
    // Ascending eigenvalues give descending semi-axes.
    let order = [2, 1, 0];
    Ok(Ellipsoid {
        center: *center,
        axes: order.map(|a| eig.vectors[a]),
        semi_axes: order.map(|a| (xi_max / eig.values[a]).sqrt()),
    })
}
