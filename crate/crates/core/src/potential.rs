//! Quartic bulk potential, in physical and rescaled form.
//!
//! Solver-facing code works with the rescaled potential
//! `f*(Q) = k* - (a*/2) tr Q² - (b*/3) tr Q³ + (c*/4) (tr Q²)²`
//! whose zero set is the unit-norm prolate uniaxial tensors. Physical
//! energies are recovered by multiplying with `2 s*² / 3`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold;
use crate::qtensor::QTensor;
use crate::sampling;

const SQRT6: f64 = 2.449_489_742_783_178;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Reduced temperature `ac / b²`.
    pub t: f64,
    /// Scalar order of the physical vacuum manifold.
    pub s_star: f64,
    pub a_star: f64,
    pub b_star: f64,
    pub c_star: f64,
    /// Additive constant making the physical potential vanish on its minimizers.
    pub k_phys: f64,
    /// Additive constant making `f*` vanish on the unit-sphere vacuum manifold.
    pub k_star: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub kappa_star: f64,
}

/// Growth constants of `f*` near the vacuum manifold, estimated by sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldConstants {
    pub m0: f64,
    pub big_m0: f64,
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub constants: ManifoldConstants,
    pub samples: usize,
    /// Smallest `Df*(v + tν)·ν / t` seen with `t ≤ δ0`.
    pub min_normal_ratio: f64,
    /// `|Df*(v)|` maximised over sampled vacuum points.
    pub max_vacuum_gradient: f64,
    /// Smallest `f*(v) - f*(v/|v|)` over sampled `|v| ∈ (1, 3]`.
    pub min_growth_gap: f64,
    /// Worst relative violation of `m0 d²/2 ≤ f* ≤ M0 d²/2`.
    pub sandwich_worst: f64,
    pub passed: bool,
}

/// Derive all rescaled constants from the physical coefficients.
pub fn derive_params(a: f64, b: f64, c: f64) -> Result<MaterialParams> {
    for (name, value) in [("a", a), ("b", b), ("c", c)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveCoefficient { name, value });
        }
    }
    let s_star = (b + (b * b + 24.0 * a * c).sqrt()) / (4.0 * c);
    let a_star = a;
    let b_star = (2.0f64 / 3.0).sqrt() * s_star * b;
    let c_star = 2.0 / 3.0 * s_star * s_star * c;
    // -g(sqrt(3/2)) with g(s) = -(a*/3)s² - (2b*/27)s³ + (c*/9)s⁴
    let k_star = a_star / 2.0 + b_star / (3.0 * SQRT6) - c_star / 4.0;
    let k_phys = 2.0 / 3.0 * s_star * s_star * k_star;
    let (mu1, mu2, sigma) = sandwich_terms(a, b, c, s_star);
    Ok(MaterialParams {
        a,
        b,
        c,
        t: a * c / (b * b),
        s_star,
        a_star,
        b_star,
        c_star,
        k_phys,
        k_star,
        mu1,
        mu2,
        sigma,
        kappa_star: 0.75 * PI,
    })
}

fn sandwich_terms(a: f64, b: f64, c: f64, s: f64) -> (f64, f64, f64) {
    let qa = a / 2.0 + s * s * c / 3.0;
    let qb = b * s / 9.0 - 2.0 * s * s * c / 3.0;
    let qc = s * s * c / 6.0;
    let quad = |x: f64| qa + qb * x + qc * x * x;
    let vertex = (-qb / (2.0 * qc)).clamp(0.0, 1.0);
    let mu1 = quad(vertex).min(quad(0.0)).min(quad(1.0));
    let mu2 = quad(0.0).max(quad(1.0));
    (mu1, mu2, b * s / 18.0)
}

impl MaterialParams {
    /// Factor converting rescaled energies into physical ones.
    pub fn physical_factor(&self) -> f64 {
        2.0 / 3.0 * self.s_star * self.s_star
    }

    pub fn sandwich_constants(&self) -> (f64, f64, f64) {
        (self.mu1, self.mu2, self.sigma)
    }

    pub fn fstar(&self, q: &QTensor) -> f64 {
        let t2 = q.trace2();
        let t3 = q.trace3();
        self.k_star - 0.5 * self.a_star * t2 - self.b_star / 3.0 * t3 + 0.25 * self.c_star * t2 * t2
    }

    /// Intrinsic gradient of `f*` on S0:
    /// `-a* Q - b* (Q² - tr Q²/3 Id) + c* Q tr Q²`.
    pub fn grad_fstar(&self, q: &QTensor) -> QTensor {
        self.fstar_and_grad(q).1
    }

    #[inline]
    pub fn fstar_and_grad(&self, q: &QTensor) -> (f64, QTensor) {
        let sq = q.square();
        let t2 = q.norm_sq();
        let t3 = q.dot(&sq);
        let f = self.k_star - 0.5 * self.a_star * t2 - self.b_star / 3.0 * t3
            + 0.25 * self.c_star * t2 * t2;
        let g = *q * (self.c_star * t2 - self.a_star) - sq * self.b_star;
        (f, g)
    }

    /// `f*(new) - f*(old)` evaluated from differences, accurate when the two
    /// arguments are close.
    #[inline]
    pub fn fstar_difference(&self, new: &QTensor, old: &QTensor) -> f64 {
        let d = *new - *old;
        let s = *new + *old;
        let dt2 = d.dot(&s);
        // tr A³ - tr B³ = tr((A - B)(A² + AB + B²)) = D : (3/4 S² + 1/4 D²)
        let dt3 = d.dot(&(s.square() * 0.75 + d.square() * 0.25));
        let sum_t2 = new.norm_sq() + old.norm_sq();
        -0.5 * self.a_star * dt2 - self.b_star / 3.0 * dt3 + 0.25 * self.c_star * dt2 * sum_t2
    }

    /// Physical potential `f(Q) = k - (a/2) tr Q² - (b/3) tr Q³ + (c/4) (tr Q²)²`.
    pub fn f_physical(&self, q: &QTensor) -> f64 {
        let t2 = q.trace2();
        let t3 = q.trace3();
        self.k_phys - 0.5 * self.a * t2 - self.b / 3.0 * t3 + 0.25 * self.c * t2 * t2
    }

    /// `f*` restricted to prolate uniaxial tensors of norm `x`.
    pub fn fstar_uniaxial(&self, x: f64) -> f64 {
        self.k_star - 0.5 * self.a_star * x * x - self.b_star / (3.0 * SQRT6) * x.powi(3)
            + 0.25 * self.c_star * x.powi(4)
    }

    /// Lower and upper sandwich bounds `(μ1(1-|Q|)² + σβ|Q|³, μ2(1-|Q|)² + 2σβ|Q|³)`.
    pub fn sandwich_bounds(&self, q: &QTensor) -> (f64, f64) {
        let n = q.norm();
        let beta = q.biaxiality();
        let x = (1.0 - n) * (1.0 - n);
        let cube = n * n * n;
        (
            self.mu1 * x + self.sigma * beta * cube,
            self.mu2 * x + 2.0 * self.sigma * beta * cube,
        )
    }

    /// `min f*` over `{dist(Q, N) ≥ delta, |Q| ≤ 1}`, found by scanning the
    /// two spectral invariants (norm and eigenvalue angle).
    pub fn min_fstar_away_from_vacuum(&self, delta: f64) -> f64 {
        const N_NORM: usize = 400;
        const N_ANGLE: usize = 400;
        let mut best = f64::INFINITY;
        for i in 0..=N_NORM {
            let rho = i as f64 / N_NORM as f64;
            for j in 0..=N_ANGLE {
                let psi = PI / 3.0 * j as f64 / N_ANGLE as f64;
                let dist2 = rho * rho + 1.0 - 2.0 * rho * psi.cos();
                if dist2 < delta * delta {
                    continue;
                }
                let t3 = rho.powi(3) * (3.0 * psi).cos() / SQRT6;
                let t2 = rho * rho;
                let f = self.k_star - 0.5 * self.a_star * t2 - self.b_star / 3.0 * t3
                    + 0.25 * self.c_star * t2 * t2;
                best = best.min(f);
            }
        }
        best
    }
}

/// Sample H2, H3 and the quadratic growth sandwich around the vacuum
/// manifold. Returns the estimated constants together with the largest
/// `δ0 ≤ 0.5` (on a 0.05 ladder) for which every check passes.
pub fn validate_hypotheses(p: &MaterialParams, samples: usize) -> Result<HypothesisReport> {
    if samples < 1000 {
        return Err(Error::InvalidSpec(format!(
            "hypothesis validation needs at least 1000 samples, got {samples}"
        )));
    }
    const T_STEPS: usize = 25;
    const DELTA_MAX: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_f5);

    // (t, derivative ratio, 2 f*/d²) per sampled normal ray
    let mut rays: Vec<(f64, f64, f64)> = Vec::with_capacity(samples * T_STEPS);
    let mut max_vacuum_gradient: f64 = 0.0;
    let n_rays = samples.div_ceil(T_STEPS).max(1);
    for _ in 0..n_rays {
        let n = sampling::unit_vector3(&mut rng);
        let v = manifold::phi_unchecked(&n);
        let nu = random_normal(&mut rng, &n);
        max_vacuum_gradient = max_vacuum_gradient.max(p.grad_fstar(&v).norm());
        for k in 1..=T_STEPS {
            let t = DELTA_MAX * k as f64 / T_STEPS as f64;
            let u = v + nu * t;
            let ratio = p.grad_fstar(&u).dot(&nu) / t;
            let d = manifold::dist_to_n(&u);
            rays.push((t, ratio, 2.0 * p.fstar(&u) / (d * d)));
        }
    }

    let mut min_growth_gap = f64::INFINITY;
    for _ in 0..samples {
        let dir = sampling::unit_qtensor(&mut rng);
        let r = 1.0 + 2.0 * (1.0 - rand::Rng::gen::<f64>(&mut rng));
        let gap = p.fstar(&(dir * r)) - p.fstar(&dir);
        min_growth_gap = min_growth_gap.min(gap);
    }
    if min_growth_gap.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::HypothesisViolated {
            hypothesis: "H3",
            detail: format!("f*(v) - f*(v/|v|) = {min_growth_gap:e} for some |v| in (1, 3]"),
        });
    }
    if max_vacuum_gradient > 1e-10 {
        return Err(Error::HypothesisViolated {
            hypothesis: "H1",
            detail: format!("|Df*| = {max_vacuum_gradient:e} on the vacuum manifold"),
        });
    }

    let mut delta0 = DELTA_MAX;
    while delta0 > 0.049 {
        let inside = rays.iter().filter(|r| r.0 <= delta0 + 1e-12);
        let (mut m0, mut big_m0) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(_, ratio, _) in inside.clone() {
            m0 = m0.min(ratio);
            big_m0 = big_m0.max(ratio);
        }
        if m0 > 0.0 {
            // integrating the ray bounds gives the quadratic sandwich
            let worst = inside
                .map(|&(_, _, q)| ((m0 - q) / m0).max((q - big_m0) / big_m0))
                .fold(f64::NEG_INFINITY, f64::max);
            if worst <= 1e-3 {
                return Ok(HypothesisReport {
                    constants: ManifoldConstants {
                        m0,
                        big_m0,
                        delta0,
                    },
                    samples,
                    min_normal_ratio: m0,
                    max_vacuum_gradient,
                    min_growth_gap,
                    sandwich_worst: worst,
                    passed: true,
                });
            }
        }
        delta0 -= 0.05;
    }
    Err(Error::HypothesisViolated {
        hypothesis: "H2",
        detail: "no delta0 >= 0.05 gives a positive normal growth constant".into(),
    })
}

/// Random unit vector in the 3-dimensional normal space of N at `phi(n)`.
pub(crate) fn random_normal<R: rand::Rng + ?Sized>(rng: &mut R, n: &Vector3<f64>) -> QTensor {
    let (e, f) = manifold::orthonormal_complement(n);
    let tangent = |w: &Vector3<f64>| {
        let t = QTensor::from_matrix(&(n * w.transpose() + w * n.transpose()));
        t * (1.0 / t.norm())
    };
    let (t1, t2) = (tangent(&e), tangent(&f));
    loop {
        let mut x = sampling::unit_qtensor(rng);
        x -= t1 * x.dot(&t1);
        x -= t2 * x.dot(&t2);
        let norm = x.norm();
        if norm > 1e-6 {
            return x * (1.0 / norm);
        }
    }
}
