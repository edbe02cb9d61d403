//! Seeded random sampling of directors and tensors.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::qtensor::QTensor;

pub fn unit_vector3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Uniformly distributed direction in S0.
pub fn unit_qtensor<R: Rng + ?Sized>(rng: &mut R) -> QTensor {
    loop {
        let q = QTensor::new(std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = q.norm();
        if n > 1e-8 {
            return q * (1.0 / n);
        }
    }
}

/// Random tensor with norm drawn uniformly from `[min_norm, max_norm]`.
pub fn qtensor_with_norm_in<R: Rng + ?Sized>(rng: &mut R, min_norm: f64, max_norm: f64) -> QTensor {
    let r = rng.gen_range(min_norm..=max_norm);
    unit_qtensor(rng) * r
}

/// Random tensor uniformly distributed in the ball `|Q| ≤ radius` of S0.
pub fn qtensor_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> QTensor {
    let u: f64 = rng.gen();
    unit_qtensor(rng) * (radius * u.powf(0.2))
}
