//! Algebra of symmetric traceless 3x3 tensors.
//!
//! A [`QTensor`] is stored as five coefficients in the Frobenius-orthonormal
//! basis
//!
//! ```text
//! E0 = (e1e1 - e2e2) / sqrt(2)
//! E1 = (2 e3e3 - e1e1 - e2e2) / sqrt(6)
//! E2 = (e1e2 + e2e1) / sqrt(2)
//! E3 = (e1e3 + e3e1) / sqrt(2)
//! E4 = (e2e3 + e3e2) / sqrt(2)
//! ```
//!
//! so symmetry and zero trace hold by construction and `Q:P` equals the
//! Euclidean dot product of the coefficient vectors.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which a tensor is treated as the isotropic state.
pub const TOL_ZERO: f64 = 1e-12;

/// Relative eigenvalue gap below which a spectrum is flagged degenerate.
pub const TOL_DEGENERATE: f64 = 1e-8;

const FRAME_TOL: f64 = 1e-8;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT6: f64 = 0.408_248_290_463_863;
const HALF_INV_SQRT6: f64 = 0.204_124_145_231_931_5;
const HALF_INV_SQRT2: f64 = 0.353_553_390_593_273_8;
const SQRT_2_3: f64 = 0.816_496_580_927_726;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QTensor(pub [f64; 5]);

impl QTensor {
    pub const ZERO: QTensor = QTensor([0.0; 5]);

    pub fn new(coeffs: [f64; 5]) -> Self {
        QTensor(coeffs)
    }

    pub fn coeffs(&self) -> &[f64; 5] {
        &self.0
    }

    /// Orthogonal projection of a (not necessarily traceless) symmetric matrix onto S0.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let s12 = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        let s13 = 0.5 * (m[(0, 2)] + m[(2, 0)]);
        let s23 = 0.5 * (m[(1, 2)] + m[(2, 1)]);
        QTensor([
            (m[(0, 0)] - m[(1, 1)]) * INV_SQRT2,
            (2.0 * m[(2, 2)] - m[(0, 0)] - m[(1, 1)]) * INV_SQRT6,
            2.0 * s12 * INV_SQRT2,
            2.0 * s13 * INV_SQRT2,
            2.0 * s23 * INV_SQRT2,
        ])
    }

    /// `s (n⊗n - Id/3)`, the uniaxial tensor with director `n` and order `s`.
    pub fn uniaxial(n: &Vector3<f64>, s: f64) -> Self {
        QTensor::from_matrix(&(s * (n * n.transpose())))
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let [q0, q1, q2, q3, q4] = self.0;
        let d1 = q0 * INV_SQRT2 - q1 * INV_SQRT6;
        let d2 = -q0 * INV_SQRT2 - q1 * INV_SQRT6;
        let d3 = 2.0 * q1 * INV_SQRT6;
        let o12 = q2 * INV_SQRT2;
        let o13 = q3 * INV_SQRT2;
        let o23 = q4 * INV_SQRT2;
        Matrix3::new(d1, o12, o13, o12, d2, o23, o13, o23, d3)
    }

    pub fn dot(&self, other: &QTensor) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `tr Q²`, equal to `|Q|²`.
    pub fn trace2(&self) -> f64 {
        self.norm_sq()
    }

    /// `tr Q³`.
    pub fn trace3(&self) -> f64 {
        self.dot(&self.square())
    }

    /// Traceless part of `Q²`, i.e. the coefficients `tr(Q² E_i)`.
    #[inline]
    pub fn square(&self) -> QTensor {
        let [q0, q1, q2, q3, q4] = self.0;
        QTensor([
            -SQRT_2_3 * q0 * q1 + HALF_INV_SQRT2 * (q3 * q3 - q4 * q4),
            INV_SQRT6 * (q1 * q1 - q0 * q0 - q2 * q2) + HALF_INV_SQRT6 * (q3 * q3 + q4 * q4),
            -SQRT_2_3 * q1 * q2 + INV_SQRT2 * q3 * q4,
            INV_SQRT2 * (q0 * q3 + q2 * q4) + INV_SQRT6 * q1 * q3,
            INV_SQRT2 * (q2 * q3 - q0 * q4) + INV_SQRT6 * q1 * q4,
        ])
    }

    /// Traceless part of `(QP + PQ)/2`.
    pub fn sym_product(&self, other: &QTensor) -> QTensor {
        ((*self + *other).square() - (*self - *other).square()) * 0.25
    }

    /// Biaxiality parameter `1 - 6 (tr Q³)² / (tr Q²)³`, with the convention `β(0) = 0`.
    pub fn biaxiality(&self) -> f64 {
        let t2 = self.trace2();
        if t2.sqrt() < TOL_ZERO {
            return 0.0;
        }
        let t3 = self.trace3();
        (1.0 - 6.0 * t3 * t3 / (t2 * t2 * t2)).clamp(0.0, 1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn eigensystem(&self) -> Eigensystem {
        Eigensystem::of(self)
    }

    pub fn represent(&self) -> Result<Representation> {
        let norm = self.norm();
        if norm <= TOL_ZERO {
            return Err(Error::ZeroTensor { norm });
        }
        let eig = self.eigensystem();
        let [l1, l2, _] = eig.values;
        let s = 2.0 * l1 + l2;
        let r = ((l1 + 2.0 * l2) / s).clamp(0.0, 1.0);
        Ok(Representation {
            s,
            r,
            n: eig.vectors[0],
            m: eig.vectors[1],
        })
    }

    pub fn compose(rep: &Representation) -> Result<Self> {
        rep.check_frame()?;
        let id3 = Matrix3::identity() / 3.0;
        let nn = rep.n * rep.n.transpose() - id3;
        let mm = rep.m * rep.m.transpose() - id3;
        Ok(QTensor::from_matrix(&(rep.s * (nn + rep.r * mm))))
    }
}

impl Add for QTensor {
    type Output = QTensor;
    fn add(mut self, rhs: QTensor) -> QTensor {
        self += rhs;
        self
    }
}

impl AddAssign for QTensor {
    fn add_assign(&mut self, rhs: QTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for QTensor {
    type Output = QTensor;
    fn sub(mut self, rhs: QTensor) -> QTensor {
        self -= rhs;
        self
    }
}

impl SubAssign for QTensor {
    fn sub_assign(&mut self, rhs: QTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl Mul<f64> for QTensor {
    type Output = QTensor;
    fn mul(self, k: f64) -> QTensor {
        QTensor(self.0.map(|x| x * k))
    }
}

impl Mul<QTensor> for f64 {
    type Output = QTensor;
    fn mul(self, q: QTensor) -> QTensor {
        q * self
    }
}

impl Neg for QTensor {
    type Output = QTensor;
    fn neg(self) -> QTensor {
        self * -1.0
    }
}

/// The `(s, r, n, m)` coordinates of a nonzero tensor:
/// `Q = s {(n⊗n - Id/3) + r (m⊗m - Id/3)}` with `s > 0`, `r ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representation {
    pub s: f64,
    pub r: f64,
    pub n: Vector3<f64>,
    pub m: Vector3<f64>,
}

impl Representation {
    fn check_frame(&self) -> Result<()> {
        let (nn, mn, dot) = (self.n.norm(), self.m.norm(), self.n.dot(&self.m));
        if (nn - 1.0).abs() > FRAME_TOL || (mn - 1.0).abs() > FRAME_TOL || dot.abs() > FRAME_TOL {
            return Err(Error::InvalidFrame {
                n_norm: nn,
                m_norm: mn,
                dot,
            });
        }
        Ok(())
    }

    /// `|Q|² = (2/3) s² (r² - r + 1)`.
    pub fn norm_sq(&self) -> f64 {
        2.0 / 3.0 * self.s * self.s * (self.r * self.r - self.r + 1.0)
    }

    /// `β = 27 r² (1-r)² / (4 (r² - r + 1)³)`.
    pub fn biaxiality(&self) -> f64 {
        let r = self.r;
        let d = r * r - r + 1.0;
        27.0 * r * r * (1.0 - r) * (1.0 - r) / (4.0 * d * d * d)
    }
}

/// Sorted eigenvalues `λ1 ≥ λ2 ≥ λ3` with orthonormal eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigensystem {
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
    /// Set when some eigenvalue gap is below `TOL_DEGENERATE * |Q|`.
    pub degenerate: bool,
}

impl Eigensystem {
    /// Trigonometric (Cardano) eigenvalues; eigenvectors from the best
    /// separated eigenvalue followed by an exact 2x2 rotation on its
    /// orthogonal complement.
    pub fn of(q: &QTensor) -> Self {
        let norm = q.norm();
        let a = q.matrix();
        if norm < TOL_ZERO {
            return Eigensystem {
                values: [0.0; 3],
                vectors: [Vector3::x(), Vector3::y(), Vector3::z()],
                degenerate: true,
            };
        }
        let p = (norm * norm / 6.0).sqrt();
        let half_det = (a / p).determinant() / 2.0;
        let phi = half_det.clamp(-1.0, 1.0).acos() / 3.0;
        let l1 = 2.0 * p * phi.cos();
        let l3 = 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        let l2 = -l1 - l3;

        let tol = TOL_DEGENERATE * norm;
        let (iso_value, iso_is_top) = if l1 - l2 >= l2 - l3 {
            (l1, true)
        } else {
            (l3, false)
        };
        let v_iso = null_vector(&(a - iso_value * Matrix3::identity()));
        let (u, w) = complement_basis(&v_iso);
        let au = a * u;
        let aw = a * w;
        let (a11, a12, a22) = (u.dot(&au), u.dot(&aw), w.dot(&aw));
        let theta = 0.5 * (2.0 * a12).atan2(a11 - a22);
        let (s, c) = theta.sin_cos();
        let e_hi = c * u + s * w;
        let e_lo = -s * u + c * w;

        let mut vectors = if iso_is_top {
            [v_iso, e_hi, e_lo]
        } else {
            [e_hi, e_lo, v_iso]
        };
        for v in vectors.iter_mut() {
            canonical_sign(v);
        }
        let mut values = vectors.map(|v| v.dot(&(a * v)));
        // Rayleigh quotients may swap order only at round-off level.
        if values[0] < values[1] {
            values.swap(0, 1);
            vectors.swap(0, 1);
        }
        if values[1] < values[2] {
            values.swap(1, 2);
            vectors.swap(1, 2);
        }
        let degenerate = values[0] - values[1] < tol || values[1] - values[2] < tol;
        Eigensystem {
            values,
            vectors,
            degenerate,
        }
    }
}

/// Unit vector spanning the kernel of a rank-2 symmetric matrix.
fn null_vector(m: &Matrix3<f64>) -> Vector3<f64> {
    let r0 = m.row(0).transpose();
    let r1 = m.row(1).transpose();
    let r2 = m.row(2).transpose();
    let candidates = [r0.cross(&r1), r1.cross(&r2), r2.cross(&r0)];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
        .copied()
        .unwrap_or_else(Vector3::x);
    let n = best.norm();
    if n > 0.0 {
        best / n
    } else {
        Vector3::x()
    }
}

pub(crate) fn complement_basis(v: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let k = (0..3)
        .min_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
        .unwrap_or(0);
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let u = (e - v.dot(&e) * v).normalize();
    let w = v.cross(&u);
    (u, w)
}

/// Flip `v` so that its first nonzero component is positive.
fn canonical_sign(v: &mut Vector3<f64>) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-14) {
        if first < 0.0 {
            *v = -*v;
        }
    }
}
