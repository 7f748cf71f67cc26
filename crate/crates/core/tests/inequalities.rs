use std::sync::Arc;

use pathspace::geometry::{CurvatureProfile, ManifoldModel};
use pathspace::inequalities::rates::{super_poincare_beta, RatePipeline, TailMode};
use pathspace::inequalities::{
    estimate_damped_dirichlet, estimate_dirichlet, estimate_entropy, sample_rho, tail_from_samples, MCConfig,
};
use pathspace::malliavin::suite::gaussian_exponential;
use pathspace::malliavin::{CylinderFunction, LocalizedFunction};
use proptest::prelude::*;

fn cfg(paths: usize, steps: usize, seed: u64) -> MCConfig {
    MCConfig { paths, steps, seed, ..MCConfig::default() }
}

/// `∫ g(x) φ(x) dx` for the standard normal density, by the trapezoid rule on [−12, 12].
fn gaussian_expectation(g: impl Fn(f64) -> f64) -> f64 {
    let n = 24_000;
    let h = 24.0 / n as f64;
    let dens = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (0..=n)
        .map(|i| {
            let x = -12.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * g(x) * dens(x)
        })
        .sum::<f64>()
        * h
}

#[test]
fn flat_dirichlet_form_matches_quadrature() {
    let m = ManifoldModel::euclidean(1).unwrap();
    let value = Arc::new(|p: &[&[f64]]| p[0][0].tanh());
    let grad = Arc::new(|p: &[&[f64]], _: usize, out: &mut [f64]| out[0] = 1.0 / p[0][0].cosh().powi(2));
    let f = LocalizedFunction::plain(CylinderFunction::new("tanh", vec![1.0], value, grad).unwrap());
    let est = estimate_dirichlet(&m, &f, &cfg(20_000, 64, 5)).unwrap();
    let want = gaussian_expectation(|x| x.cosh().powi(-4));
    assert!((est.mean - want).abs() < 3.0 * est.se, "{est:?} vs {want}");
    let damped = estimate_damped_dirichlet(&m, &f, &cfg(20_000, 64, 5)).unwrap();
    assert_eq!(est, damped);
}

#[test]
fn gaussian_entropy_equals_twice_the_energy() {
    let m = ManifoldModel::euclidean(1).unwrap();
    let f = LocalizedFunction::plain(gaussian_exponential(&m, 1.0, 1.0).unwrap());
    let c = cfg(20_000, 64, 7);
    let ent = estimate_entropy(&m, &f, &c).unwrap();
    let e = estimate_dirichlet(&m, &f, &c).unwrap();
    assert!((ent.mean - 0.5).abs() < 3.0 * ent.se, "{ent:?}");
    assert!((2.0 * e.mean - 0.5).abs() < 6.0 * e.se, "{e:?}");
}

/// `P(sup_{[0,1]} |W| < a)` by the reflection series.
fn stay_probability(a: f64) -> f64 {
    use std::f64::consts::PI;
    (0..50)
        .map(|n| {
            let k = (2 * n + 1) as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            4.0 / PI * sign / k * (-k * k * PI * PI / (8.0 * a * a)).exp()
        })
        .sum()
}

#[test]
fn flat_tail_matches_reflection_series() {
    let m = ManifoldModel::euclidean(1).unwrap();
    let steps = 256;
    let rho = sample_rho(&m, &cfg(20_000, steps, 3)).unwrap();
    // discrete monitoring shifts the barrier by 0.5826·√Δt
    let shift = 0.5826 / (steps as f64).sqrt();
    let mut last = 1.0;
    for a in [0.5, 1.0, 1.5, 2.0, 2.5] {
        let est = tail_from_samples(&rho, a);
        let want = 1.0 - stay_probability(a + shift);
        assert!((est.mean - want).abs() < 3.0 * est.se + 2e-3, "a={a}: {est:?} vs {want}");
        assert!(est.mean <= last);
        last = est.mean;
    }
}

#[test]
fn super_poincare_rate_at_one() {
    let beta = super_poincare_beta(1.0, 1.0, 0.25, 0.5).unwrap();
    assert!((beta - std::f64::consts::E.powi(2)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rate_functions_are_monotone(
        c1 in 0.1..3.0f64,
        c2 in 0.1..3.0f64,
        d1 in 0.0..0.5f64,
        d2 in 0.0..1.0f64,
        r1 in 0.1..2.0f64,
    ) {
        let prof = CurvatureProfile::parametric(c1, c2, d1, d2).unwrap();
        let p = RatePipeline::with_grid(prof, TailMode::Analytic { c1: 1.0, c2: 0.5 }, 30.0, 200).unwrap();
        let mut last_theta = 0.0;
        for i in 0..40 {
            let r = 0.25 * i as f64;
            let th = p.theta(r, r1).unwrap();
            prop_assert!(th + 1e-15 >= last_theta);
            last_theta = th;
            let g = p.g_r(r, 5.0, r1).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
        }
        let rows = p.weak_lsi_rate(&[1e-8, 1e-5, 1e-3, 0.1, 0.5]).unwrap();
        let alphas: Vec<f64> = rows.iter().filter_map(|r| r.alpha).collect();
        for w in alphas.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(p.monotonicity_witnesses(&rows).iter().all(|w| w.holds));
    }
}
