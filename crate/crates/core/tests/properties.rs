use metastab::dynamics::{angular_sa_velocity, angular_usa_velocity, step};
use metastab::energy::{
    energy, energy_angular, grad_angular, hessian_angular, hessian_quadratic_form, sa_metric_hessian,
};
use metastab::geometry::cap_alpha;
use metastab::initgen::{gen_separated, SeparatedSpec};
use metastab::metastability::validate_separated;
use metastab::verify::{fd_gradient, fd_hessian};
use metastab::{Configuration, Model, Scheme, UnitVector};
use proptest::prelude::*;
use std::f64::consts::PI;

fn angles(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..2.0 * PI, n)
}

fn unit3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
}

/// Gram-Schmidt on three random vectors.
fn orthogonal(a: &[f64], b: &[f64], c: &[f64]) -> Option<[[f64; 3]; 3]> {
    let mut q: Vec<[f64; 3]> = Vec::new();
    for v in [a, b, c] {
        let mut u = [v[0], v[1], v[2]];
        for e in &q {
            let p: f64 = (0..3).map(|i| u[i] * e[i]).sum();
            (0..3).for_each(|i| u[i] -= p * e[i]);
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-3 {
            return None;
        }
        q.push(u.map(|x| x / n));
    }
    Some([q[0], q[1], q[2]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_invariant_under_rotation_and_permutation(
        pts in prop::collection::vec(unit3(), 2..8),
        (a, b, c) in (unit3(), unit3(), unit3()),
        beta in 0.5f64..20.0,
        shift in 0usize..8,
    ) {
        let Some(q) = orthogonal(&a, &b, &c) else { return Ok(()) };
        let x = Configuration::normalized(3, pts.clone(), None).unwrap();
        let rotated: Vec<Vec<f64>> = x.points().map(|p| (0..3).map(|i| (0..3).map(|j| q[i][j] * p[j]).sum()).collect()).collect();
        let mut perm: Vec<Vec<f64>> = x.points().map(|p| p.to_vec()).collect();
        let len = perm.len();
        perm.rotate_left(shift % len);
        let e0 = energy(&x, beta);
        let e1 = energy(&Configuration::normalized(3, rotated, None).unwrap(), beta);
        let e2 = energy(&Configuration::normalized(3, perm, None).unwrap(), beta);
        prop_assert!((e0.normalized - e1.normalized).abs() < 1e-12);
        prop_assert!((e0.normalized - e2.normalized).abs() < 1e-12);
        prop_assert!(e0.normalized > 0.0 && e0.normalized <= 1.0 + 1e-15);
        prop_assert!((e0.raw - e0.normalized / (2.0 * beta)).abs() < 1e-15);
    }

    #[test]
    fn angular_energy_matches_embedding(theta in angles(2..=8), beta in 0.5f64..20.0, phi in 0.0..2.0 * PI) {
        let w = vec![1.0; theta.len()];
        let e = energy_angular(&theta, &w, beta).normalized;
        let shifted: Vec<f64> = theta.iter().map(|t| t + phi).collect();
        let x = Configuration::from_angles(&shifted, None).unwrap();
        prop_assert!((e - energy(&x, beta).normalized).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(theta in angles(2..=8), beta in 0.5f64..20.0,
        w in prop::collection::vec(0.2f64..2.0, 8)) {
        let w = &w[..theta.len()];
        let g = grad_angular(&theta, w, beta);
        let f = fd_gradient(&theta, w, beta, 1e-6);
        let scale = g.iter().map(|x| x.abs()).fold(1e-3, f64::max);
        for (a, b) in g.iter().zip(&f) {
            prop_assert!((a - b).abs() < 1e-6 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_weight_gradient_is_usa_field(theta in angles(2..=8), beta in 0.5f64..20.0) {
        let w = vec![1.0; theta.len()];
        let g = grad_angular(&theta, &w, beta);
        let v = angular_usa_velocity(&theta, &w, beta);
        for (a, b) in g.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-14);
        }
        prop_assert!(v.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn hessian_symmetric_rows_sum_to_zero(theta in angles(2..=8), beta in 0.5f64..20.0) {
        let w = vec![1.0; theta.len()];
        let h = hessian_angular(&theta, &w, beta);
        let hf = fd_hessian(&theta, &w, beta, 1e-5);
        for i in 0..theta.len() {
            prop_assert!(h[i].iter().sum::<f64>().abs() < 1e-13);
            for j in 0..theta.len() {
                prop_assert!((h[i][j] - h[j][i]).abs() < 1e-15);
                prop_assert!((h[i][j] - hf[i][j]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn quadratic_form_identity(theta in angles(2..=8), beta in 0.5f64..20.0,
        v in prop::collection::vec(-1.0f64..1.0, 8)) {
        let w = vec![1.0; theta.len()];
        let (a, b) = hessian_quadratic_form(&theta, &w, beta, &v[..theta.len()]);
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn sa_jacobian_matches_finite_differences(theta in angles(2..=6), beta in 0.5f64..10.0) {
        let w = vec![1.0; theta.len()];
        let j = sa_metric_hessian(&theta, &w, beta);
        let h = 1e-6;
        for c in 0..theta.len() {
            let mut p = theta.clone();
            let mut m = theta.clone();
            p[c] += h;
            m[c] -= h;
            let (fp, fm) = (angular_sa_velocity(&p, &w, beta), angular_sa_velocity(&m, &w, beta));
            for r in 0..theta.len() {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                prop_assert!((j[r][c] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{} vs {fd}", j[r][c]);
            }
        }
    }

    #[test]
    fn cap_alpha_matches_grid_search(sep in 0.5f64..PI, eps in 0.001f64..0.05) {
        let phi = (1.0 - 2.0 * eps).acos();
        prop_assume!(sep > 2.0 * phi + 1e-3);
        let c = vec![UnitVector::from_angle(0.0), UnitVector::from_angle(sep)];
        let a = cap_alpha(&c, eps).unwrap();
        let grid = 400;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=grid {
            let x = -phi + 2.0 * phi * i as f64 / grid as f64;
            for j in 0..=grid {
                let y = sep - phi + 2.0 * phi * j as f64 / grid as f64;
                best = best.max((x - y).cos());
            }
        }
        prop_assert!((a - best).abs() < 1e-9, "{a} vs {best}");
    }

    #[test]
    fn projected_steps_stay_on_sphere(pts in prop::collection::vec(unit3(), 2..8), beta in 0.5f64..50.0, usa in any::<bool>()) {
        let x = Configuration::normalized(3, pts, None).unwrap();
        let model = if usa { Model::usa(beta) } else { Model::sa(beta) };
        for scheme in [Scheme::EulerProject, Scheme::Rk4Project] {
            let y = step(&model, scheme, &x, 0.05);
            for p in y.points() {
                prop_assert!((p.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_configurations_validate(seed in 0u64..1000, k in 2usize..4, dim in 2usize..4) {
        let spec = SeparatedSpec { dim, n: 3 * k, k, eps: 0.01, beta: 100.0, centers: None };
        let (x, cert) = gen_separated(&spec, seed).unwrap();
        prop_assert!(cert.gamma > 0.0);
        for (i, p) in x.points().enumerate() {
            let w = &cert.caps.centers[cert.assignment[i]];
            prop_assert!(p.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum::<f64>() >= 1.0 - 0.01);
        }
        let found = validate_separated(&x, 0.01, 100.0).unwrap();
        prop_assert_eq!(found.k(), k);
    }
}
