use std::f64::consts::FRAC_PI_2;

use pathspace::geometry::ManifoldModel;
use proptest::prelude::*;

fn models() -> Vec<ManifoldModel> {
    vec![
        ManifoldModel::euclidean(3).unwrap(),
        ManifoldModel::sphere2(),
        ManifoldModel::hyperbolic2(),
        ManifoldModel::log_surface(1.0, 0.5).unwrap(),
        ManifoldModel::log_surface(0.0, 2.0).unwrap(),
    ]
}

/// A point reached from the origin by two steps, and a tangent frame there.
fn base_point(m: &ManifoldModel, a: f64, b: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let o = m.origin();
    let f = m.origin_frame();
    let v = f.apply(&[a, b]);
    let x = m.exp_map(&o, &v).unwrap();
    let e0 = m.parallel_transport(&o, &f.column(0), &v).unwrap();
    let e1 = m.parallel_transport(&o, &f.column(1), &v).unwrap();
    (x, e0, e1)
}

fn combine(e0: &[f64], e1: &[f64], a: f64, b: f64) -> Vec<f64> {
    e0.iter().zip(e1).map(|(x, y)| a * x + b * y).collect()
}

#[test]
fn transport_there_and_back_recovers_the_vector() {
    for m in models() {
        let (x, e0, e1) = base_point(&m, 0.3, -0.2);
        let v = combine(&e0, &e1, 0.25, 0.3);
        let w = combine(&e0, &e1, -0.7, 1.1);
        let y = m.exp_map(&x, &v).unwrap();
        let back_dir: Vec<f64> = m.parallel_transport(&x, &v, &v).unwrap().iter().map(|c| -c).collect();
        let wy = m.parallel_transport(&x, &w, &v).unwrap();
        let home = m.exp_map(&y, &back_dir).unwrap();
        let w_back = m.parallel_transport(&y, &wy, &back_dir).unwrap();
        let dx: f64 = home.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dw: f64 = w_back.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dx < 1e-8 && dw < 1e-8, "{}: {dx} {dw}", m.kind());
    }
}

#[test]
fn surface_geodesic_speed_is_conserved() {
    for m in [ManifoldModel::log_surface(1.0, 0.5).unwrap(), ManifoldModel::log_surface(0.2, 3.0).unwrap()] {
        let (x, e0, e1) = base_point(&m, 0.3, 0.25);
        for (a, b) in [(0.5, 0.0), (0.0, 0.5), (0.3, -0.4), (-0.2, 0.1)] {
            let v = combine(&e0, &e1, a, b);
            let speed = m.inner(&x, &v, &v).unwrap().sqrt();
            for frac in [0.25, 0.5, 0.75, 1.0] {
                let part: Vec<f64> = v.iter().map(|c| frac * c).collect();
                let y = m.exp_map(&x, &part).unwrap();
                let vel = m.parallel_transport(&x, &v, &part).unwrap();
                let s = m.inner(&y, &vel, &vel).unwrap().sqrt();
                assert!((s - speed).abs() < 1e-6, "{}: {s} vs {speed}", m.kind());
            }
        }
    }
}

/// Rotation by `angle` about the unit axis `k`.
fn rodrigues(k: [f64; 3], angle: f64, w: [f64; 3]) -> [f64; 3] {
    let (c, s) = (angle.cos(), angle.sin());
    let kw = k[0] * w[0] + k[1] * w[1] + k[2] * w[2];
    let cross = [k[1] * w[2] - k[2] * w[1], k[2] * w[0] - k[0] * w[2], k[0] * w[1] - k[1] * w[0]];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = w[i] * c + cross[i] * s + k[i] * kw * (1.0 - c);
    }
    out
}

#[test]
fn sphere_quarter_circle_transport_is_a_rotation() {
    let m = ManifoldModel::sphere2().with_step_guard(2.0);
    let x = [1.0, 0.0, 0.0];
    let u = [0.0, 0.6, 0.8];
    let v: Vec<f64> = u.iter().map(|c| FRAC_PI_2 * c).collect();
    let axis = [0.0, -0.8, 0.6]; // x × u
    for w in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, -0.3, 0.9]] {
        let got = m.parallel_transport(&x, &w, &v).unwrap();
        let want = rodrigues(axis, FRAC_PI_2, w);
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }
    let end = m.exp_map(&x, &v).unwrap();
    let want = rodrigues(axis, FRAC_PI_2, x);
    for i in 0..3 {
        assert!((end[i] - want[i]).abs() < 1e-12);
    }
}

#[test]
fn sphere_quarter_step_from_pole_reaches_the_equator() {
    let m = ManifoldModel::sphere2().with_step_guard(2.0);
    let o = m.origin();
    let v = m.origin_frame().apply(&[FRAC_PI_2 * 0.6, FRAC_PI_2 * 0.8]);
    let y = m.exp_map(&o, &v).unwrap();
    let height: f64 = y.iter().zip(&o).map(|(a, b)| a * b).sum();
    assert!(height.abs() < 1e-12);
    assert!((m.dist_to_origin(&y).unwrap() - FRAC_PI_2).abs() < 1e-12);
    assert!(ManifoldModel::sphere2().exp_map(&o, &v).is_err());
}

#[test]
fn curvature_examples() {
    let e = std::f64::consts::E - 1.0;
    let m = ManifoldModel::log_surface(1.0, 0.5).unwrap();
    let f = m.origin_frame();
    let x = m.exp_map(&m.origin(), &f.apply(&[0.5, 0.0])).unwrap();
    // radial steps: 0.5, then four quarters of the remaining distance
    let mut p = x.clone();
    let mut dir = m.parallel_transport(&m.origin(), &f.apply(&[(e - 0.5) / 4.0, 0.0]), &f.apply(&[0.5, 0.0])).unwrap();
    for _ in 0..4 {
        let q = m.exp_map(&p, &dir).unwrap();
        dir = m.parallel_transport(&p, &dir, &dir).unwrap();
        p = q;
    }
    assert!((m.dist_to_origin(&p).unwrap() - e).abs() < 1e-8);
    assert!((m.ricci_factor(&p) + 1.5).abs() < 1e-8);
    let (k, k1) = m.radial_ricci_bounds(e).unwrap();
    assert!((k - 1.5).abs() < 1e-14 && (k1 + 1.5).abs() < 1e-14);
    assert_eq!(ManifoldModel::sphere2().radial_ricci_bounds(7.0).unwrap(), (1.0, 1.0));
    assert_eq!(ManifoldModel::hyperbolic2().radial_ricci_bounds(7.0).unwrap(), (1.0, -1.0));
    assert_eq!(ManifoldModel::euclidean(2).unwrap().radial_ricci_bounds(7.0).unwrap(), (0.0, 0.0));
    let eu = ManifoldModel::euclidean(2).unwrap();
    assert_eq!(eu.dist_to_origin(&[3.0, 4.0]).unwrap(), 5.0);
    let s = ManifoldModel::sphere2();
    let anti: Vec<f64> = s.origin().iter().map(|c| -c).collect();
    assert!((s.dist_to_origin(&anti).unwrap() - std::f64::consts::PI).abs() < 1e-12);
}

proptest! {
    #[test]
    fn radial_bounds_are_monotone(r1 in 0.0..50.0f64, gap in 0.0..50.0f64, a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let r2 = r1 + gap;
        for m in [ManifoldModel::log_surface(a, b).unwrap(), ManifoldModel::sphere2(), ManifoldModel::hyperbolic2()] {
            let (k_small, k1_small) = m.radial_ricci_bounds(r1).unwrap();
            let (k_large, k1_large) = m.radial_ricci_bounds(r2).unwrap();
            prop_assert!(k_small <= k_large && k1_small >= k1_large);
        }
    }

    #[test]
    fn metric_is_positive_definite_along_steps(a in -0.35..0.35f64, b in -0.35..0.35f64) {
        for m in models() {
            let (x, e0, e1) = base_point(&m, a, b);
            let g00 = m.inner(&x, &e0, &e0).unwrap();
            let g11 = m.inner(&x, &e1, &e1).unwrap();
            let g01 = m.inner(&x, &e0, &e1).unwrap();
            prop_assert!((g00 - 1.0).abs() < 1e-9 && (g11 - 1.0).abs() < 1e-9 && g01.abs() < 1e-9);
        }
    }
}
