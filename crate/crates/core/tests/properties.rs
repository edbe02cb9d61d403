use std::sync::Arc;

use ldg2d::grid::{build_grid, BoundarySpec, Domain, Field};
use ldg2d::manifold;
use ldg2d::potential::derive_params;
use ldg2d::qtensor::QTensor;
use ldg2d::{dump, sampling, solver};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tensor() -> impl Strategy<Value = QTensor> {
    prop::array::uniform5(-1.5f64..1.5).prop_map(QTensor::new)
}

fn material() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.05f64..5.0, 0.05f64..5.0, 0.05f64..5.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn biaxiality_in_unit_interval_and_matches_r(q in tensor()) {
        prop_assume!(q.norm() > 1e-3);
        let beta = q.biaxiality();
        prop_assert!((0.0..=1.0).contains(&beta));
        let rep = q.represent().unwrap();
        prop_assert!((rep.biaxiality() - beta).abs() < 1e-9);
        prop_assert!((rep.norm_sq() - q.norm_sq()).abs() < 1e-10 * q.norm_sq().max(1.0));
    }

    #[test]
    fn represent_compose_round_trip(q in tensor()) {
        prop_assume!(q.norm() > 1e-3);
        let back = QTensor::compose(&q.represent().unwrap()).unwrap();
        prop_assert!((back - q).norm() < 1e-10 * q.norm().max(1.0));
    }

    #[test]
    fn trace_identities(q in tensor(), p in tensor()) {
        let m = q.matrix();
        prop_assert!(((m * m * m).trace() - q.trace3()).abs() < 1e-10 * q.norm().powi(3).max(1.0));
        let sym = q.sym_product(&p).matrix();
        let direct = 0.5 * (q.matrix() * p.matrix() + p.matrix() * q.matrix());
        let traceless = direct - nalgebra::Matrix3::identity() * (direct.trace() / 3.0);
        prop_assert!((sym - traceless).norm() < 1e-12 * (1.0 + q.norm() * p.norm()));
    }

    #[test]
    fn grad_fstar_matches_central_differences(q in tensor(), (a, b, c) in material()) {
        let p = derive_params(a, b, c).unwrap();
        let g = p.grad_fstar(&q);
        let step = 1e-5;
        for k in 0..5 {
            let mut e = [0.0; 5];
            e[k] = step;
            let d = QTensor::new(e);
            let fd = (p.fstar(&(q + d)) - p.fstar(&(q - d))) / (2.0 * step);
            prop_assert!((fd - g.coeffs()[k]).abs() <= 1e-6 * g.norm().max(1.0), "{k}: {fd} vs {}", g.coeffs()[k]);
        }
    }

    #[test]
    fn fstar_vanishes_on_n_and_is_nonnegative(q in tensor(), (a, b, c) in material()) {
        let p = derive_params(a, b, c).unwrap();
        prop_assert!(p.fstar(&q) >= -1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(q.coeffs()[0].to_bits());
        let v = manifold::phi(&sampling::unit_vector3(&mut rng)).unwrap();
        prop_assert!(p.fstar(&v).abs() < 1e-12);
        prop_assert!(p.grad_fstar(&v).norm() < 1e-10);
    }

    #[test]
    fn fstar_difference_is_consistent(q in tensor(), r in tensor(), (a, b, c) in material()) {
        let p = derive_params(a, b, c).unwrap();
        let direct = p.fstar(&q) - p.fstar(&r);
        let scale = p.fstar(&q).abs() + p.fstar(&r).abs() + 1.0;
        prop_assert!((p.fstar_difference(&q, &r) - direct).abs() < 1e-12 * scale);
    }

    #[test]
    fn projection_lands_on_n_and_is_idempotent(q in tensor()) {
        let Ok(pq) = manifold::project_to_n(&q) else { return Ok(()); };
        prop_assert!((pq.norm() - 1.0).abs() < 1e-12);
        prop_assert!(pq.biaxiality() < 1e-9);
        prop_assert!(manifold::dist_to_n(&pq) < 1e-6);
        prop_assert!((manifold::project_to_n(&pq).unwrap() - pq).norm() < 1e-12);
        prop_assert!((manifold::dist_to_n(&q) - (q - pq).norm()).abs() < 1e-9);
    }

    #[test]
    fn phi_is_head_tail_symmetric(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let v = nalgebra::Vector3::new(x, y, z);
        prop_assume!(v.norm() > 1e-3);
        let n = v.normalize();
        prop_assert!((manifold::phi(&n).unwrap() - manifold::phi(&-n).unwrap()).norm() < 1e-14);
    }
}

fn fill_random(f: &mut Field, rng: &mut ChaCha8Rng, radius: f64) {
    let cells: Vec<usize> = f.grid.interior_cells().map(|(i, j)| f.grid.index(i, j)).collect();
    for k in cells {
        f.values[k] = sampling::qtensor_in_ball(rng, radius);
    }
}

fn random_field(seed: u64, n: usize, eps: f64) -> Field {
    let p = derive_params(1.0, 0.7, 1.3).unwrap();
    let g = Arc::new(build_grid(Domain::disk([0.0, 0.0], 1.0), n).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Field::zeros(g, eps, p);
    fill_random(&mut f, &mut rng, 1.0);
    f.apply_boundary(&BoundarySpec::geodesic(1)).unwrap();
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn el_gradient_matches_energy_differences(seed in any::<u64>(), eps in 0.05f64..0.5) {
        let f = random_field(seed, 16, eps);
        let g = solver::el_gradient(&f);
        let step = 1e-5;
        let cells: Vec<usize> = f.grid.interior_cells().map(|(i, j)| f.grid.index(i, j)).step_by(7).collect();
        for &k in &cells {
            for c in 0..5 {
                let mut e = [0.0; 5];
                e[c] = step;
                let mut plus = f.clone();
                plus.values[k] += QTensor::new(e);
                let mut minus = f.clone();
                minus.values[k] -= QTensor::new(e);
                let fd = (solver::energy(&plus).total - solver::energy(&minus).total) / (2.0 * step);
                let exact = g[k].coeffs()[c];
                prop_assert!((fd - exact).abs() <= 1e-7 * exact.abs().max(1.0), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn dumps_round_trip_bit_exactly(seed in any::<u64>()) {
        let f = random_field(seed, 20, 0.1);
        for enc in [dump::Encoding::Csv, dump::Encoding::F64le] {
            let mut buf = Vec::new();
            dump::write_field(&f, enc, &mut buf).unwrap();
            let back = dump::read_field(buf.as_slice()).unwrap();
            prop_assert_eq!(&back.values, &f.values);
        }
    }

    #[test]
    fn truncation_never_increases_energy(seed in any::<u64>()) {
        let p = derive_params(1.0, 1.0, 1.0).unwrap();
        let g = Arc::new(build_grid(Domain::disk([0.0, 0.0], 1.0), 16).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::zeros(g, 0.2, p);
        fill_random(&mut f, &mut rng, 2.0);
        f.apply_boundary(&BoundarySpec::geodesic(1)).unwrap();
        let t = solver::truncate(&f);
        prop_assert!(solver::energy(&t).total <= solver::energy(&f).total + 1e-12);
        for (i, j) in t.grid.interior_cells() {
            prop_assert!(t.get(i, j).norm() <= 1.0 + 1e-12);
        }
    }
}
