use super::*;
use crate::sampling::{random_chart_point, random_components, rng_for};

fn catalog() -> Vec<Model<f64>> {
    vec![
        Model::euclidean(3),
        Model::hyperbolic_plane(),
        Model::half_space(3, 0.7).unwrap(),
        Model::product(Model::hyperbolic_plane(), Model::euclidean(1)),
        Model::product(Model::hyperbolic_plane(), Model::hyperbolic_plane()),
        Model::revolution(Profile::Cosh),
        Model::revolution(Profile::Exp),
        Model::revolution(Profile::polynomial_convex(vec![0.5, 0.0, 0.1]).unwrap()),
        Model::sphere(2, 1.0).unwrap(),
        Model::sphere(3, 2.0).unwrap(),
    ]
}

fn tv(x: &[f64], c: &[f64]) -> TangentVec<f64> {
    TangentVec::new(ChartPoint::new(x.to_vec()), c.to_vec()).unwrap()
}

#[test]
fn euclidean_metric_is_identity() {
    let m = Model::<f64>::euclidean(3);
    let g = m.metric_at(&ChartPoint::new(vec![1.0, -2.0, 5.0])).unwrap();
    assert_eq!(g, Matrix::identity(3));
}

#[test]
fn half_plane_metric_at_height_two() {
    let m = Model::<f64>::hyperbolic_plane();
    let g = m.metric_at(&ChartPoint::new(vec![0.0, 2.0])).unwrap();
    assert!((g[(0, 0)] - 0.25).abs() < 1e-15);
    assert!((g[(1, 1)] - 0.25).abs() < 1e-15);
    assert_eq!(g[(0, 1)], 0.0);
}

#[test]
fn flat_product_metric_is_identity() {
    let m = Model::<f64>::product(Model::euclidean(1), Model::euclidean(1));
    assert_eq!(m.metric_at(&ChartPoint::new(vec![3.0, 4.0])).unwrap(), Matrix::identity(2));
}

#[test]
fn outside_chart_is_domain_error() {
    let m = Model::<f64>::hyperbolic_plane();
    assert!(matches!(m.metric_at(&ChartPoint::new(vec![0.0, -1.0])), Err(Error::Domain { .. })));
    assert!(matches!(m.christoffel_at(&ChartPoint::new(vec![0.0, 0.0])), Err(Error::Domain { .. })));
}

#[test]
fn half_plane_christoffels_at_unit_height() {
    let m = Model::<f64>::hyperbolic_plane();
    let g = m.christoffel_at(&ChartPoint::new(vec![0.0, 1.0])).unwrap();
    // indices are zero-based: Γ^1_12 = get(0,0,1)
    assert!((g.get(0, 0, 1) + 1.0).abs() < 1e-15);
    assert!((g.get(0, 1, 0) + 1.0).abs() < 1e-15);
    assert!((g.get(1, 0, 0) - 1.0).abs() < 1e-15);
    assert!((g.get(1, 1, 1) + 1.0).abs() < 1e-15);
    assert_eq!(g.get(0, 0, 0), 0.0);
    assert_eq!(g.get(1, 0, 1), 0.0);
}

#[test]
fn euclidean_christoffels_vanish() {
    let m = Model::<f64>::euclidean(4);
    let g = m.christoffel_at(&ChartPoint::new(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
    assert_eq!(g.max_abs(), 0.0);
}

#[test]
fn cosh_revolution_christoffel_at_origin() {
    let m = Model::<f64>::revolution(Profile::Cosh);
    let g = m.christoffel_at(&ChartPoint::new(vec![0.0, 0.0])).unwrap();
    // Γ^r_θθ = −f f'(0) = 0
    assert_eq!(g.get(0, 1, 1), 0.0);
    let g1 = m.christoffel_at(&ChartPoint::new(vec![1.0, 0.0])).unwrap();
    assert!((g1.get(0, 1, 1) + 1f64.cosh() * 1f64.sinh()).abs() < 1e-14);
    assert!((g1.get(1, 0, 1) - 1f64.tanh()).abs() < 1e-14);
}

#[test]
fn curvature_vanishes_in_euclidean_space() {
    let m = Model::<f64>::euclidean(3);
    let x = [0.5, 1.0, -1.0];
    let r = m.curvature_op(&tv(&x, &[1.0, 2.0, 3.0]), &tv(&x, &[0.0, 1.0, 0.0]), &tv(&x, &[4.0, 0.0, 1.0])).unwrap();
    assert!(r.components.iter().all(|&c| c == 0.0));
}

#[test]
fn constant_curvature_identity_in_half_space() {
    // R(u,v)v = −(|v|²u − ⟨u,v⟩v) for curvature −1
    let m = Model::<f64>::half_space(3, 1.0).unwrap();
    let mut rng = rng_for(11, 0);
    for _ in 0..50 {
        let x = random_chart_point(&m, &mut rng, 2.0);
        let u = random_components::<f64>(3, &mut rng);
        let v = random_components::<f64>(3, &mut rng);
        let r = m.curvature_raw(&x.coords, &u, &v, &v);
        let vv = m.inner(&x.coords, &v, &v);
        let uv = m.inner(&x.coords, &u, &v);
        for k in 0..3 {
            let expect = -(vv * u[k] - uv * v[k]);
            assert!((r[k] - expect).abs() < 1e-9 * (1.0 + expect.abs()), "{r:?}");
        }
    }
}

#[test]
fn mixed_planes_in_products_are_flat() {
    let m = Model::<f64>::product(Model::hyperbolic_plane(), Model::euclidean(1));
    let x = [0.2, 1.5, 3.0];
    let u = tv(&x, &[1.0, 0.3, 0.0]);
    let v = tv(&x, &[0.0, 0.0, 1.0]);
    let r = m.curvature_op(&u, &v, &v).unwrap();
    assert!(r.components.iter().all(|c| c.abs() < 1e-15));
    assert!(m.sectional_curvature(&u, &v).unwrap().abs() < 1e-8);
}

#[test]
fn sectional_curvature_oracles() {
    let h2 = Model::<f64>::hyperbolic_plane();
    let k = h2.sectional_curvature(&tv(&[0.3, 0.4], &[1.0, 0.2]), &tv(&[0.3, 0.4], &[-0.5, 2.0])).unwrap();
    assert!((k + 1.0).abs() < 1e-8);

    let s2 = Model::<f64>::sphere(2, 1.0).unwrap();
    let k = s2.sectional_curvature(&tv(&[0.7, -0.2], &[1.0, 0.0]), &tv(&[0.7, -0.2], &[0.3, 1.0])).unwrap();
    assert!((k - 1.0).abs() < 1e-8);

    let s3 = Model::<f64>::sphere(3, 2.0).unwrap();
    let x = [0.4, 1.1, -0.3];
    let k = s3.sectional_curvature(&tv(&x, &[1.0, 0.0, 0.5]), &tv(&x, &[0.0, 1.0, 0.2])).unwrap();
    assert!((k - 0.25).abs() < 1e-8);

    let hs = Model::<f64>::half_space(2, 0.5).unwrap();
    let k = hs.sectional_curvature(&tv(&[0.0, 3.0], &[1.0, 0.0]), &tv(&[0.0, 3.0], &[0.0, 1.0])).unwrap();
    assert!((k + 0.25).abs() < 1e-8);
}

#[test]
fn revolution_curvature_is_minus_f2_over_f() {
    let p = Profile::polynomial_convex(vec![0.5, 0.0, 0.1]).unwrap();
    let m = Model::<f64>::revolution(p.clone());
    for r in [-2.0, -0.3, 0.0, 0.8, 3.0] {
        let x = [r, 0.4];
        let k = m.sectional_raw(&x, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let (f, _, f2) = p.eval(r);
        assert!((k + f2 / f).abs() < 1e-10 * (1.0 + f2 / f), "r={r}");
    }
    let cosh = Model::<f64>::revolution(Profile::Cosh);
    assert!((cosh.sectional_raw(&[1.3, 0.0], &[1.0, 1.0], &[0.0, 1.0]).unwrap() + 1.0).abs() < 1e-10);
}

#[test]
fn dependent_vectors_have_no_plane() {
    let m = Model::<f64>::hyperbolic_plane();
    let err = m.sectional_curvature(&tv(&[0.0, 1.0], &[1.0, 1.0]), &tv(&[0.0, 1.0], &[2.0, 2.0]));
    assert_eq!(err, Err(Error::DegeneratePlane));
}

#[test]
fn mismatched_base_points_are_usage_errors() {
    let m = Model::<f64>::hyperbolic_plane();
    let err = m.curvature_op(&tv(&[0.0, 1.0], &[1.0, 0.0]), &tv(&[0.0, 2.0], &[0.0, 1.0]), &tv(&[0.0, 1.0], &[0.0, 1.0]));
    assert!(matches!(err, Err(Error::Usage(_))));
}

#[test]
fn metric_is_spd_at_random_points() {
    for (mi, m) in catalog().iter().enumerate() {
        let mut rng = rng_for(100, mi as u64);
        for _ in 0..1000 {
            let x = random_chart_point(m, &mut rng, 3.0);
            let g = m.metric_at(&x).unwrap();
            assert!(g.asymmetry().unwrap() <= 1e-12 * g.max_abs());
            assert!(g.cholesky().is_some(), "{m} at {:?}", x.coords);
        }
    }
}

#[test]
fn npc_models_have_nonpositive_sectional_curvature() {
    for (mi, m) in catalog().iter().enumerate().filter(|(_, m)| m.is_npc()) {
        let mut rng = rng_for(200, mi as u64);
        for _ in 0..1000 {
            let x = random_chart_point(m, &mut rng, 3.0);
            let u = random_components::<f64>(m.dim(), &mut rng);
            let v = random_components::<f64>(m.dim(), &mut rng);
            if let Some(k) = m.sectional_raw(&x.coords, &u, &v) {
                assert!(k <= 1e-8, "{m}: K = {k}");
            }
        }
    }
}

#[test]
fn curvature_antisymmetry_and_bianchi() {
    for (mi, m) in catalog().iter().enumerate() {
        let mut rng = rng_for(300, mi as u64);
        let n = m.dim();
        for _ in 0..200 {
            let x = random_chart_point(m, &mut rng, 2.0);
            let u = random_components::<f64>(n, &mut rng);
            let v = random_components::<f64>(n, &mut rng);
            let w = random_components::<f64>(n, &mut rng);
            let xs = &x.coords;
            let ruv = m.curvature_raw(xs, &u, &v, &w);
            let rvu = m.curvature_raw(xs, &v, &u, &w);
            let rvw = m.curvature_raw(xs, &v, &w, &u);
            let rwu = m.curvature_raw(xs, &w, &u, &v);
            let sc = ruv.iter().chain(&rvw).chain(&rwu).fold(1.0f64, |a, b| a.max(b.abs()));
            for k in 0..n {
                assert!((ruv[k] + rvu[k]).abs() <= 1e-8 * sc, "{m}: antisymmetry");
                assert!((ruv[k] + rvw[k] + rwu[k]).abs() <= 1e-6 * sc, "{m}: Bianchi");
            }
        }
    }
}

#[test]
fn finite_difference_christoffels_match_closed_forms() {
    for (mi, m) in catalog().iter().enumerate() {
        let mut rng = rng_for(400, mi as u64);
        for _ in 0..100 {
            let x = random_chart_point(m, &mut rng, 2.0);
            let exact = m.christoffel_at(&x).unwrap();
            let fd = christoffel_finite_difference(m, &x, 1e-5).unwrap();
            let scale = exact.max_abs().max(1e-300);
            let err = exact.as_slice().iter().zip(fd.as_slice()).fold(0.0f64, |a, (e, f)| a.max((e - f).abs()));
            assert!(err <= 1e-6 * scale.max(1.0), "{m}: {err} vs scale {scale}");
            assert!(exact.lower_asymmetry() == 0.0);
        }
    }
}

#[test]
fn christoffel_derivatives_match_finite_differences() {
    for (mi, m) in catalog().iter().enumerate() {
        let mut rng = rng_for(500, mi as u64);
        let n = m.dim();
        let n3 = n * n * n;
        for _ in 0..50 {
            let x = random_chart_point(m, &mut rng, 2.0);
            let d = m.christoffel_derivative_raw(&x.coords);
            let h = 1e-5;
            for mm in 0..n {
                let mut xp = x.coords.clone();
                let mut xm = x.coords.clone();
                xp[mm] += h;
                xm[mm] -= h;
                let (gp, gm) = (m.christoffel_raw(&xp), m.christoffel_raw(&xm));
                for q in 0..n3 {
                    let fd = (gp[q] - gm[q]) / (2.0 * h);
                    assert!((fd - d[mm * n3 + q]).abs() < 1e-5 * (1.0 + fd.abs()), "{m}");
                }
            }
        }
    }
}

#[test]
fn accel_jvp_is_the_derivative_of_the_geodesic_acceleration() {
    for (mi, m) in catalog().iter().enumerate() {
        let mut rng = rng_for(600, mi as u64);
        let n = m.dim();
        for _ in 0..50 {
            let x = random_chart_point(m, &mut rng, 2.0);
            let v = random_components::<f64>(n, &mut rng);
            let dx = random_components::<f64>(n, &mut rng);
            let dv = random_components::<f64>(n, &mut rng);
            let mut jvp = vec![0.0; n];
            m.accel_jvp(&x.coords, &v, &dx, &dv, &mut jvp);
            let h = 1e-6 * x.coords.iter().fold(1.0f64, |a, c| a.min(c.abs().max(0.05)));
            let xp: Vec<f64> = x.coords.iter().zip(&dx).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.coords.iter().zip(&dx).map(|(a, b)| a - h * b).collect();
            let vp: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + h * b).collect();
            let vm: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a - h * b).collect();
            let (mut ap, mut am) = (vec![0.0; n], vec![0.0; n]);
            m.geodesic_accel(&xp, &vp, &mut ap);
            m.geodesic_accel(&xm, &vm, &mut am);
            for k in 0..n {
                let fd = (ap[k] - am[k]) / (2.0 * h);
                assert!((fd - jvp[k]).abs() < 1e-5 * (1.0 + fd.abs()), "{m}: {fd} vs {}", jvp[k]);
            }
        }
    }
}

#[test]
fn gamma_contract_agrees_with_full_symbols() {
    for (mi, m) in catalog().iter().enumerate() {
        let mut rng = rng_for(700, mi as u64);
        let n = m.dim();
        let x = random_chart_point(m, &mut rng, 2.0);
        let u = random_components::<f64>(n, &mut rng);
        let w = random_components::<f64>(n, &mut rng);
        let full = m.christoffel_at(&x).unwrap().contract(&u, &w);
        let mut fast = vec![0.0; n];
        m.gamma_contract(&x.coords, &u, &w, &mut fast);
        for k in 0..n {
            assert!((full[k] - fast[k]).abs() < 1e-12 * (1.0 + full[k].abs()));
        }
    }
}

#[test]
fn display_names() {
    let m = Model::<f64>::product(Model::hyperbolic_plane(), Model::revolution(Profile::Cosh));
    assert_eq!(m.to_string(), "product(halfspace(2,1),revolution(cosh))");
    assert!(m.is_npc());
    assert!(!Model::<f64>::product(Model::euclidean(1), Model::sphere(2, 1.0).unwrap()).is_npc());
}

#[test]
fn works_at_single_precision() {
    let m = Model::<f32>::hyperbolic_plane();
    let k = m.sectional_raw(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!((k + 1.0).abs() < 1e-5);
}
