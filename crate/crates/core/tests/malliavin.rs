use pathspace::cmspace::{wedge_vector, CMVector};
use pathspace::geometry::ManifoldModel;
use pathspace::malliavin::suite::{default_cutoff_times, default_suite, DEFAULT_CUTOFF_RADIUS};
use pathspace::malliavin::{cutoff_gradient, damped_apply, damped_inverse, directional_derivative, ou_gradient, CutoffSpec};
use pathspace::pathsim::{phi_flow, roll_path, TimeGrid};
use proptest::prelude::*;

fn models() -> Vec<ManifoldModel> {
    vec![
        ManifoldModel::euclidean(2).unwrap(),
        ManifoldModel::sphere2(),
        ManifoldModel::hyperbolic2(),
        ManifoldModel::log_surface(1.0, 0.5).unwrap(),
    ]
}

/// Piecewise constant derivative on 16 equal cells, independent of the grid.
fn coarse(grid: TimeGrid, cells: &[[f64; 2]]) -> CMVector {
    let steps = grid.steps();
    let width = steps / cells.len();
    let deriv = (0..steps).flat_map(|k| cells[k / width]).collect();
    CMVector::from_derivative(grid, 2, deriv).unwrap()
}

fn identity_defect(m: &ManifoldModel, steps: usize, cells: &[[f64; 2]]) -> f64 {
    let g = TimeGrid::new(steps).unwrap();
    let p = roll_path(m, TimeGrid::new(1024).unwrap(), 8, 0).unwrap().subsample(1024 / steps).unwrap();
    let flow = phi_flow(m, &p).unwrap();
    let h = coarse(g, cells);
    let back = damped_inverse(&flow, &damped_apply(&flow, &h).unwrap()).unwrap();
    back.add_scaled(-1.0, &h).unwrap().norm() / h.norm()
}

#[test]
fn inverse_defect_decays_at_first_order() {
    let cells: Vec<[f64; 2]> = (0..16).map(|i| [((i * 7) % 5) as f64 - 2.0, ((i * 3) % 4) as f64 - 1.5]).collect();
    for m in models().into_iter().skip(1) {
        let ns = [128usize, 256, 512, 1024];
        let errs: Vec<f64> = ns.iter().map(|&n| identity_defect(&m, n, &cells)).collect();
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(-slope >= 0.9, "{}: {errs:?}", m.kind());
        assert!(errs[2] < 5e-3, "{}: {errs:?}", m.kind());
    }
}

#[test]
fn sphere_damped_wedge_closed_form() {
    // Φ_{r,s} = e^{-(s-r)/2}: (ÂΨ_{t,v})'(r) = v·e^{-(t-r)/2} on [0, t)
    let m = ManifoldModel::sphere2();
    let g = TimeGrid::new(512).unwrap();
    let p = roll_path(&m, g, 1, 3).unwrap();
    let flow = phi_flow(&m, &p).unwrap();
    let (t, v) = (0.75, [0.6, -1.2]);
    let a = damped_apply(&flow, &wedge_vector(g, t, &v).unwrap()).unwrap();
    for k in 0..512 {
        let r = (k as f64 + 0.5) / 512.0;
        let scale = if r < t { (-(t - r) / 2.0).exp() } else { 0.0 };
        let d = a.derivative(k);
        assert!((d[0] - v[0] * scale).abs() < 1e-5 && (d[1] - v[1] * scale).abs() < 1e-5, "{k}: {d:?}");
    }
    let want = (v[0] * v[0] + v[1] * v[1]) * (1.0 - (-t).exp());
    assert!((a.norm_sq() - want).abs() < 1e-5);
}

#[test]
fn cutoff_gradient_never_exceeds_the_slope_bound() {
    let l = CutoffSpec::new(DEFAULT_CUTOFF_RADIUS).unwrap();
    let times = default_cutoff_times();
    let g = TimeGrid::new(128).unwrap();
    for m in models().into_iter().skip(1) {
        let mut active = 0;
        for i in 0..1000 {
            let p = roll_path(&m, g, 21, i).unwrap();
            let d = cutoff_gradient(&m, &l, &times, &p).unwrap().norm();
            assert!(d <= l.sup_derivative() + 1e-12, "{}: {d}", m.kind());
            active += usize::from(d > 0.0);
        }
        assert!(active > 0, "{}: the cutoff never moved", m.kind());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gradient_pairing_is_the_directional_derivative(seed in any::<u64>(), which in 0usize..4, cells in proptest::collection::vec(-2.0f64..2.0, 32)) {
        let m = models()[which].clone();
        let g = TimeGrid::new(64).unwrap();
        let p = roll_path(&m, g, seed, 0).unwrap();
        let pairs: Vec<[f64; 2]> = cells.chunks(2).map(|c| [c[0], c[1]]).collect();
        let h = coarse(g, &pairs);
        for f in default_suite(&m).unwrap() {
            let a = ou_gradient(&f.base, &p).unwrap().inner(&h).unwrap();
            let b = directional_derivative(&f.base, &p, &h).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }
}
