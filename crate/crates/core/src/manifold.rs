//! The vacuum manifold `N = {φ(n) : n ∈ S²}`, a copy of RP² on the unit
//! sphere of S0.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qtensor::{self, QTensor, TOL_DEGENERATE};

const SQRT_3_2: f64 = 1.224_744_871_391_589;
const UNIT_TOL: f64 = 1e-10;

/// `√(3/2) (n⊗n - Id/3)` for a unit vector `n`.
pub fn phi(n: &Vector3<f64>) -> Result<QTensor> {
    let norm = n.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitVector { norm });
    }
    Ok(phi_unchecked(n))
}

pub(crate) fn phi_unchecked(n: &Vector3<f64>) -> QTensor {
    QTensor::uniaxial(n, SQRT_3_2)
}

pub(crate) fn orthonormal_complement(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    qtensor::complement_basis(n)
}

/// Nearest point of `N`, i.e. `φ` of the leading eigenvector.
pub fn project_to_n(q: &QTensor) -> Result<QTensor> {
    let es = q.eigensystem();
    let gap = es.values[0] - es.values[1];
    if gap <= TOL_DEGENERATE * q.norm().max(1.0) {
        return Err(Error::ProjectionUndefined { gap });
    }
    Ok(phi_unchecked(&es.vectors[0]))
}

/// Leading unit eigenvector, if the top eigenvalue is simple.
pub fn leading_director(q: &QTensor) -> Result<Vector3<f64>> {
    let es = q.eigensystem();
    let gap = es.values[0] - es.values[1];
    if gap <= TOL_DEGENERATE * q.norm().max(1.0) {
        return Err(Error::ProjectionUndefined { gap });
    }
    Ok(es.vectors[0])
}

/// `dist(Q, N)² = |Q|² + 1 - √6 λ1(Q)`.
pub fn dist_to_n(q: &QTensor) -> f64 {
    let l1 = q.eigensystem().values[0];
    (q.norm_sq() + 1.0 - 6f64.sqrt() * l1).max(0.0).sqrt()
}

/// Geodesic loop `c*(θ) = φ(cos θ/2, sin θ/2, 0)`.
pub fn geodesic_loop(theta: f64) -> QTensor {
    let (s, c) = (0.5 * theta).sin_cos();
    phi_unchecked(&Vector3::new(c, s, 0.0))
}

/// Half the squared speed of the geodesic loop integrated over one turn.
pub fn kappa_star() -> f64 {
    0.75 * PI
}

/// Length of the shortest non-contractible loop in `N`.
pub fn nontrivial_loop_length() -> f64 {
    (4.0 * PI * kappa_star()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HomotopyClass {
    Trivial,
    Nontrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftOptions {
    /// Samples farther than this from `N` are rejected.
    pub max_dist: f64,
    /// Minimum `|n_i · n_{i+1}|` between consecutive directors.
    pub overlap_threshold: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions {
            max_dist: 0.5,
            overlap_threshold: 0.7,
        }
    }
}

/// Classify a closed loop in a neighbourhood of `N` by lifting its
/// directors to S² through sign continuation. The loop is closed
/// implicitly: the last sample connects back to the first.
pub fn homotopy_class(samples: &[QTensor], opts: &LiftOptions) -> Result<HomotopyClass> {
    if samples.is_empty() {
        return Err(Error::InvalidSpec("empty loop".into()));
    }
    let mut directors = Vec::with_capacity(samples.len());
    for (index, q) in samples.iter().enumerate() {
        let dist = dist_to_n(q);
        if !(dist < opts.max_dist) {
            return Err(Error::TooFarFromManifold {
                index,
                dist,
                limit: opts.max_dist,
            });
        }
        directors.push(leading_director(q)?);
    }
    let first = directors[0];
    let mut current = first;
    let n = directors.len();
    for i in 1..=n {
        let next = directors[i % n];
        let overlap = current.dot(&next);
        if overlap.abs() <= opts.overlap_threshold {
            return Err(Error::SamplingTooCoarse {
                index: i - 1,
                overlap: overlap.abs(),
                threshold: opts.overlap_threshold,
            });
        }
        current = if overlap < 0.0 { -next } else { next };
    }
    // `current` is the lift of the first director after one full turn.
    Ok(if current.dot(&first) < 0.0 {
        HomotopyClass::Nontrivial
    } else {
        HomotopyClass::Trivial
    })
}
