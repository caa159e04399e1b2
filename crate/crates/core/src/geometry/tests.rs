use super::*;
use crate::models::Profile;
use crate::sampling::{random_chart_point, random_components, random_unit_normal, random_unit_vector, rng_for};

fn h2() -> Model<f64> {
    Model::hyperbolic_plane()
}

fn tv(base: &[f64], c: &[f64]) -> TangentVec<f64> {
    TangentVec::new(ChartPoint::new(base.to_vec()), c.to_vec()).unwrap()
}

fn step() -> StepControl<f64> {
    StepControl::default()
}

fn npc_models() -> Vec<Model<f64>> {
    vec![
        Model::euclidean(2),
        Model::euclidean(3),
        h2(),
        Model::half_space(3, 1.0).unwrap(),
        Model::product(h2(), Model::euclidean(1)),
        Model::product(h2(), h2()),
        Model::revolution(Profile::Cosh),
        Model::revolution(Profile::polynomial_convex(vec![0.5, 0.0, 0.1]).unwrap()),
    ]
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn straight_line_in_the_plane() {
    let p = geodesic_ivp(&Model::euclidean(2), &tv(&[0.0, 0.0], &[1.0, 0.0]), 3.0, &step()).unwrap();
    let last = p.samples.last().unwrap();
    assert_eq!(last.t, 3.0);
    assert!(close(&last.point.coords, &[3.0, 0.0], 1e-12));
}

#[test]
fn vertical_half_plane_geodesic_is_exponential() {
    let p = geodesic_ivp(&h2(), &tv(&[0.0, 1.0], &[0.0, 1.0]), 1.0, &step()).unwrap();
    let last = p.samples.last().unwrap();
    assert!(close(&last.point.coords, &[0.0, std::f64::consts::E], 1e-9));
    for s in &p.samples {
        assert!((s.point.coords[1] - s.t.exp()).abs() < 1e-9 * s.t.exp());
    }
}

#[test]
fn product_geodesic_is_factorwise() {
    let m = Model::product(h2(), Model::euclidean(1));
    let p = geodesic_ivp(&m, &tv(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), 1.0, &step()).unwrap();
    assert!(close(&p.samples.last().unwrap().point.coords, &[0.0, std::f64::consts::E, 0.0], 1e-9));
}

#[test]
fn points_outside_the_chart_are_rejected() {
    let err = geodesic_ivp(&h2(), &tv(&[0.0, -1.0], &[1.0, 0.0]), 1.0, &step()).unwrap_err();
    assert!(matches!(err, Error::Domain { .. }));
}

#[test]
fn speed_is_conserved_on_long_windows() {
    for m in npc_models() {
        let mut rng = rng_for(11, 0);
        for _ in 0..5 {
            let x = random_chart_point(&m, &mut rng, 1.0);
            let v = random_unit_vector(&m, &x, &mut rng);
            let p = geodesic_ivp(&m, &v, 20.0, &step()).unwrap();
            assert!(p.speed_defect(&m) < 1e-6, "{m}: {}", p.speed_defect(&m));
        }
    }
}

#[test]
fn state_at_agrees_with_samples_and_interpolation() {
    let m = Model::revolution(Profile::Cosh);
    let p = geodesic_window(&m, &tv(&[0.3, 0.1], &[0.6, 0.8]), -4.0, 4.0, &step()).unwrap();
    assert!(p.t_min() == -4.0 && p.t_max() == 4.0);
    for &t in &[-3.333, -0.01, 0.77, 3.9] {
        let (x, v) = p.state_at(&m, t).unwrap();
        let (xi, vi) = p.interpolate(t);
        assert!(close(&x, &xi, 1e-6), "{x:?} vs {xi:?}");
        assert!(close(&v, &vi, 1e-5));
    }
}

#[test]
fn reversed_and_extended_paths() {
    let m = h2();
    let p = geodesic_ivp(&m, &tv(&[0.0, 1.0], &[1.0, 0.5]), 2.0, &step()).unwrap();
    let r = p.reversed();
    assert_eq!(r.samples[0].point, p.samples.last().unwrap().point);
    assert_eq!(r.t_min(), 0.0);
    let e = p.extended(&m, -2.0, 4.0).unwrap();
    assert!(e.t_min() <= -2.0 && e.t_max() >= 4.0);
    let (x, _) = e.state_at(&m, 1.0).unwrap();
    let (y, _) = p.state_at(&m, 1.0).unwrap();
    assert!(close(&x, &y, 1e-9));
}

#[test]
fn euclidean_transport_is_constant() {
    let m = Model::euclidean(3);
    let p = geodesic_ivp(&m, &tv(&[0.0; 3], &[1.0, 2.0, 0.0]), 2.0, &step()).unwrap();
    for w in parallel_transport(&m, &p, &tv(&[0.0; 3], &[0.3, -1.0, 2.0])).unwrap() {
        assert!(close(&w.components, &[0.3, -1.0, 2.0], 1e-14));
    }
}

#[test]
fn half_plane_transport_along_vertical_geodesic() {
    let m = h2();
    let p = geodesic_ivp(&m, &tv(&[0.0, 1.0], &[0.0, 1.0]), 3.0, &step()).unwrap();
    let out = parallel_transport(&m, &p, &tv(&[0.0, 1.0], &[1.0, 0.0])).unwrap();
    for (w, s) in out.iter().zip(&p.samples) {
        let et = s.t.exp();
        assert!((w.components[0] - et).abs() < 1e-8 * et);
        assert!(w.components[1].abs() < 1e-8 * et);
        assert!((m.norm(&s.point.coords, &w.components) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn transport_preserves_norm_and_angle() {
    for m in npc_models() {
        let mut rng = rng_for(12, 0);
        let x = random_chart_point(&m, &mut rng, 1.0);
        let v = random_unit_vector(&m, &x, &mut rng);
        let w = TangentVec { base: x.clone(), components: random_components(m.dim(), &mut rng) };
        let p = geodesic_ivp(&m, &v, 8.0, &step()).unwrap();
        let nw = m.norm(&x.coords, &w.components);
        let a0 = m.inner(&x.coords, &w.components, &v.components);
        for (tw, s) in parallel_transport(&m, &p, &w).unwrap().iter().zip(&p.samples) {
            assert!((m.norm(&s.point.coords, &tw.components) - nw).abs() < 1e-6 * nw, "{m}");
            assert!((m.inner(&s.point.coords, &tw.components, &s.velocity) - a0).abs() < 1e-6 * nw.max(1.0), "{m}");
        }
    }
}

#[test]
fn product_transport_is_blockwise() {
    let m = Model::product(h2(), h2());
    let v = tv(&[0.0, 1.0, 0.5, 2.0], &[1.0, 0.2, -0.3, 0.7]);
    let w = tv(&[0.0, 1.0, 0.5, 2.0], &[0.1, 0.4, 1.0, -1.0]);
    let p = geodesic_ivp(&m, &v, 3.0, &step()).unwrap();
    let full = parallel_transport(&m, &p, &w).unwrap();
    let p1 = geodesic_ivp(&h2(), &tv(&[0.0, 1.0], &[1.0, 0.2]), 3.0, &step()).unwrap();
    let f1 = parallel_transport(&h2(), &p1, &tv(&[0.0, 1.0], &[0.1, 0.4])).unwrap();
    let last = full.last().unwrap();
    assert!(close(&last.components[..2], &f1.last().unwrap().components, 1e-8));
}

#[test]
fn frames_are_orthonormal_and_tangent() {
    for m in npc_models() {
        let mut rng = rng_for(13, 0);
        let x = random_chart_point(&m, &mut rng, 1.0);
        let v = random_unit_vector(&m, &x, &mut rng).scaled(1.7);
        let p = geodesic_ivp(&m, &v, 10.0, &step()).unwrap();
        let f = parallel_frame(&m, &p).unwrap();
        assert!(f.orthonormality_defect(&m) < 1e-6, "{m}");
        assert!(f.tangent_defect(&m) < 1e-6, "{m}");
    }
}

#[test]
fn euclidean_jacobi_fields_are_affine() {
    let m = Model::euclidean(2);
    let p = geodesic_ivp(&m, &tv(&[0.0, 0.0], &[1.0, 0.0]), 4.0, &step()).unwrap();
    let jf = jacobi_ivp(&m, &p, &tv(&[0.0, 0.0], &[0.5, 1.0]), &tv(&[0.0, 0.0], &[0.0, -2.0])).unwrap();
    for s in &jf.samples {
        assert!(close(&s.j, &[0.5, 1.0 - 2.0 * s.t], 1e-12));
        assert!(close(&s.jp, &[0.0, -2.0], 1e-12));
    }
}

#[test]
fn hyperbolic_jacobi_field_grows_like_sinh() {
    let m = h2();
    let p = geodesic_ivp(&m, &tv(&[0.0, 1.0], &[1.0, 0.0]), 10.0, &step()).unwrap();
    let jf = jacobi_ivp(&m, &p, &tv(&[0.0, 1.0], &[0.0, 0.0]), &tv(&[0.0, 1.0], &[0.0, 1.0])).unwrap();
    for (s, nj) in jf.samples.iter().zip(jf.norms(&m)) {
        if s.t == 0.0 {
            continue;
        }
        let rel = (nj - s.t.sinh()).abs() / s.t.sinh();
        let tol = if s.t <= 5.0 { 1e-6 } else { 1e-4 };
        assert!(rel <= tol, "t={} rel={rel}", s.t);
    }
}

#[test]
fn tangent_field_is_a_parallel_jacobi_field() {
    for m in npc_models() {
        let mut rng = rng_for(14, 0);
        let x = random_chart_point(&m, &mut rng, 1.0);
        let v = random_unit_vector(&m, &x, &mut rng);
        let p = geodesic_ivp(&m, &v, 5.0, &step()).unwrap();
        let jf = jacobi_ivp(&m, &p, &v, &TangentVec::zero(x.clone())).unwrap();
        for (s, ps) in jf.samples.iter().zip(&p.samples) {
            assert!(close(&s.j, &ps.velocity, 1e-7 * (1.0 + crate::linalg::norm(&ps.velocity))), "{m}");
            assert!(m.norm(&s.point.coords, &s.jp) < 1e-7, "{m}");
        }
    }
}

#[test]
fn jacobi_square_norm_is_convex() {
    for m in npc_models() {
        let mut rng = rng_for(15, 0);
        for _ in 0..3 {
            let x = random_chart_point(&m, &mut rng, 1.0);
            let v = random_unit_vector(&m, &x, &mut rng);
            let p = geodesic_ivp(&m, &v, 6.0, &step()).unwrap();
            let j0 = TangentVec { base: x.clone(), components: random_components(m.dim(), &mut rng) };
            let j0p = TangentVec { base: x.clone(), components: random_components(m.dim(), &mut rng) };
            let jf = jacobi_ivp(&m, &p, &j0, &j0p).unwrap();
            assert!(squared_norm_convexity_defect(&m, &jf) >= -1e-8, "{m}");
        }
    }
}

#[test]
fn bvp_examples() {
    let opts = BvpOptions::default();
    let e = Model::euclidean(2);
    let s = geodesic_bvp(&e, &ChartPoint::new(vec![1.0, 2.0]), &ChartPoint::new(vec![4.0, -2.0]), &opts).unwrap();
    assert!(close(&s.velocity.components, &[3.0, -4.0], 1e-12));
    assert!((s.length - 5.0).abs() < 1e-12);

    let m = h2();
    let s = geodesic_bvp(&m, &ChartPoint::new(vec![0.0, 1.0]), &ChartPoint::new(vec![0.0, 2f64.exp()]), &opts).unwrap();
    assert!(close(&s.velocity.components, &[0.0, 2.0], 1e-8));
    assert!((s.length - 2.0).abs() < 1e-8);
    assert!(s.residual <= 1e-8);

    let d = distance(&m, &ChartPoint::new(vec![0.0, 1.0]), &ChartPoint::new(vec![3.0, 1.0]), &opts).unwrap();
    assert!((d - 5.5f64.acosh()).abs() < 1e-8, "{d}");
    let d = distance(&m, &ChartPoint::new(vec![0.0, 1.0]), &ChartPoint::new(vec![0.0, std::f64::consts::E]), &opts).unwrap();
    assert!((d - 1.0).abs() < 1e-9);
}

#[test]
fn finite_difference_jacobian_mode_agrees() {
    let m = Model::product(h2(), Model::revolution(Profile::Cosh));
    let x = ChartPoint::new(vec![0.2, 0.7, 0.5, -1.0]);
    let y = ChartPoint::new(vec![-1.5, 2.0, -0.4, 2.5]);
    let a = geodesic_bvp(&m, &x, &y, &BvpOptions::default()).unwrap();
    let opts = BvpOptions { jacobian: JacobianMode::FiniteDifference, ..BvpOptions::default() };
    let b = geodesic_bvp(&m, &x, &y, &opts).unwrap();
    assert!((a.length - b.length).abs() < 1e-9);
}

/// Closed-form half-plane distance.
fn h2_distance(p: &[f64], q: &[f64]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    (1.0 + (dx * dx + dy * dy) / (2.0 * p[1] * q[1])).acosh()
}

#[test]
fn half_plane_distances_match_closed_form() {
    let m = h2();
    let mut rng = rng_for(16, 0);
    for _ in 0..40 {
        let x = random_chart_point(&m, &mut rng, 3.0);
        let y = random_chart_point(&m, &mut rng, 3.0);
        let d = distance(&m, &x, &y, &BvpOptions::default()).unwrap();
        let e = h2_distance(&x.coords, &y.coords);
        assert!((d - e).abs() <= 1e-8 * e.max(1.0), "{x:?} {y:?}: {d} vs {e}");
    }
}

#[test]
fn distance_is_symmetric_and_triangular() {
    for m in npc_models() {
        let mut rng = rng_for(17, 0);
        let opts = BvpOptions::default();
        for _ in 0..5 {
            let a = random_chart_point(&m, &mut rng, 2.0);
            let b = random_chart_point(&m, &mut rng, 2.0);
            let c = random_chart_point(&m, &mut rng, 2.0);
            let ab = distance(&m, &a, &b, &opts).unwrap();
            let ba = distance(&m, &b, &a, &opts).unwrap();
            let bc = distance(&m, &b, &c, &opts).unwrap();
            let ac = distance(&m, &a, &c, &opts).unwrap();
            assert!((ab - ba).abs() <= 1e-8 * ab.max(1.0), "{m}: {ab} {ba}");
            assert!(ac <= ab + bc + 1e-8, "{m}");
        }
    }
}

#[test]
fn product_distance_is_pythagorean() {
    let m = Model::product(h2(), Model::euclidean(1));
    let mut rng = rng_for(18, 0);
    for _ in 0..10 {
        let a = random_chart_point(&m, &mut rng, 2.0);
        let b = random_chart_point(&m, &mut rng, 2.0);
        let d = distance(&m, &a, &b, &BvpOptions::default()).unwrap();
        let d1 = h2_distance(&a.coords[..2], &b.coords[..2]);
        let d2 = a.coords[2] - b.coords[2];
        assert!((d * d - d1 * d1 - d2 * d2).abs() < 1e-8 * d.max(1.0).powi(2));
    }
}

#[test]
fn exp_log_round_trip() {
    for m in npc_models() {
        let mut rng = rng_for(19, 0);
        let opts = BvpOptions::default();
        for k in 0..6 {
            let x = random_chart_point(&m, &mut rng, 1.0);
            let len = 10.0 * (k as f64 + 1.0) / 6.0;
            let v = random_unit_vector(&m, &x, &mut rng).scaled(len);
            let y = exp_map(&m, &v, &opts.step).unwrap();
            let w = log_map(&m, &x, &y, &opts).unwrap();
            let diff: Vec<f64> = w.components.iter().zip(&v.components).map(|(a, b)| a - b).collect();
            let err = m.norm(&x.coords, &diff);
            assert!(err <= 1e-6 * len, "{m}: |v|={len} err={err}");
        }
    }
}

#[test]
fn projection_examples() {
    let opts = ProjectionOptions::default();
    let e = Model::euclidean(2);
    let axis = geodesic_window(&e, &tv(&[0.0, 0.0], &[1.0, 0.0]), -10.0, 10.0, &step()).unwrap();
    let pr = project_to_geodesic(&e, &axis, &ChartPoint::new(vec![2.0, 5.0]), &opts).unwrap();
    assert!((pr.t - 2.0).abs() < 1e-8 && close(&pr.foot.coords, &[2.0, 0.0], 1e-8));
    assert!(!pr.at_boundary);

    let m = h2();
    let line = geodesic_window(&m, &tv(&[0.0, 1.0], &[0.0, 1.0]), -5.0, 5.0, &step()).unwrap();
    let pr = project_to_geodesic(&m, &line, &ChartPoint::new(vec![1.0, 1.0]), &opts).unwrap();
    assert!(close(&pr.foot.coords, &[0.0, 2f64.sqrt()], 1e-7), "{:?}", pr.foot);
    assert!(pr.optimality < 1e-6);

    let p = Model::product(h2(), Model::euclidean(1));
    let line = geodesic_window(&p, &tv(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), -5.0, 5.0, &step()).unwrap();
    let pr = project_to_geodesic(&p, &line, &ChartPoint::new(vec![1.0, 1.0, 3.0]), &opts).unwrap();
    assert!(close(&pr.foot.coords, &[0.0, 2f64.sqrt(), 0.0], 1e-7), "{:?}", pr.foot);
}

#[test]
fn projection_flags_and_expands_windows() {
    let e = Model::euclidean(2);
    let axis = geodesic_window(&e, &tv(&[0.0, 0.0], &[1.0, 0.0]), 0.0, 1.0, &step()).unwrap();
    let x = ChartPoint::new(vec![5.0, 1.0]);
    let pr = project_to_geodesic(&e, &axis, &x, &ProjectionOptions::default()).unwrap();
    assert!(pr.at_boundary && (pr.t - 1.0).abs() < 1e-12);
    let opts = ProjectionOptions { auto_expand: true, ..ProjectionOptions::default() };
    let pr = project_to_geodesic(&e, &axis, &x, &opts).unwrap();
    assert!(!pr.at_boundary && (pr.t - 5.0).abs() < 1e-8);
}

#[test]
fn projection_does_not_increase_distances() {
    for m in npc_models() {
        let mut rng = rng_for(20, 0);
        let opts = ProjectionOptions { auto_expand: true, ..ProjectionOptions::default() };
        let x0 = random_chart_point(&m, &mut rng, 1.0);
        let v = random_unit_vector(&m, &x0, &mut rng);
        let line = geodesic_window(&m, &v, -6.0, 6.0, &step()).unwrap();
        for _ in 0..3 {
            let a = random_chart_point(&m, &mut rng, 1.5);
            let b = random_chart_point(&m, &mut rng, 1.5);
            let pa = project_to_geodesic(&m, &line, &a, &opts).unwrap();
            let pb = project_to_geodesic(&m, &line, &b, &opts).unwrap();
            let d = distance(&m, &a, &b, &opts.bvp).unwrap();
            let dp = (pa.t - pb.t).abs() * line.speed;
            assert!(dp <= d + 1e-6, "{m}: {dp} > {d}");
        }
    }
}

#[test]
fn normal_helper_is_orthogonal() {
    let m = Model::product(h2(), h2());
    let mut rng = rng_for(21, 0);
    let x = random_chart_point(&m, &mut rng, 1.0);
    let u = random_unit_vector(&m, &x, &mut rng);
    let n = random_unit_normal(&m, &x, &u.components, &mut rng);
    let b = orthonormal_basis(&m, &x.coords, &u.components).unwrap();
    assert!(m.inner(&x.coords, &b[0], &n.components).abs() < 1e-12);
}

#[test]
fn runs_at_single_precision() {
    let m = Model::<f32>::hyperbolic_plane();
    let v = TangentVec::new(ChartPoint::new(vec![0.0f32, 1.0]), vec![0.0, 1.0]).unwrap();
    let p = geodesic_ivp(&m, &v, 1.0, &StepControl::with_tolerance(1e-5)).unwrap();
    assert!((p.samples.last().unwrap().point.coords[1] - std::f32::consts::E).abs() < 1e-4);
}

#[test]
fn multiple_shooting_matches_closed_form() {
    let m = h2();
    let (x, y) = ([-0.4, 2e-4], [0.65, 1e-6]);
    let mut count = 0;
    let v = bvp::multiple_shooting(&m, &x, &y, 24, &BvpOptions::default(), &mut count).unwrap();
    let exact = (1.0 + ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)) / (2.0 * x[1] * y[1])).acosh();
    assert!((m.norm(&x, &v) - exact).abs() < 1e-6 * exact);
    assert!(count > 0);
}

#[test]
fn long_bvp_on_polynomial_profile() {
    let m = Model::revolution(Profile::polynomial_convex(vec![0.5]).unwrap());
    let x = ChartPoint::new(vec![-6.0, -1.0]);
    let y = ChartPoint::new(vec![7.0, 2.5]);
    let sol = geodesic_bvp(&m, &x, &y, &BvpOptions::default()).unwrap();
    let end = exp_map(&m, &sol.velocity, &step()).unwrap();
    assert!(close(&end.coords, &y.coords, 1e-8));
    let mut count = 0;
    // multiple shooting from the chart chord on a shorter pair
    let (a, b) = ([-2.0, -1.0], [3.0, 1.5]);
    let v = bvp::multiple_shooting(&m, &a, &b, 8, &BvpOptions::default(), &mut count).unwrap();
    let d = geodesic_bvp(&m, &ChartPoint::new(a.to_vec()), &ChartPoint::new(b.to_vec()), &BvpOptions::default()).unwrap();
    assert!((m.norm(&a, &v) - d.length).abs() < 1e-6 * d.length);
}
