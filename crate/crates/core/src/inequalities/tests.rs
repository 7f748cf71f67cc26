use super::*;
use crate::malliavin::suite::{default_suite, gaussian_exponential, linear};
use crate::malliavin::CylinderFunction;

fn cfg(paths: usize, steps: usize, seed: u64) -> MCConfig {
    MCConfig {
        paths,
        steps,
        seed,
        ..MCConfig::default()
    }
}

#[test]
fn config_validation() {
    assert!(cfg(99, 64, 0).validate().is_err());
    assert!(MCConfig { slack: -1.0, ..cfg(100, 64, 0) }.validate().is_err());
    assert!(cfg(100, 1, 0).validate().is_err());
    assert!(cfg(100, 64, 0).validate().is_ok());
}

#[test]
fn entropy_is_scale_invariant() {
    let xs: Vec<f64> = (0..500).map(|i| 1.0 + 0.5 * ((i as f64) * 0.37).sin()).collect();
    let a = entropy_from_values(&xs);
    let scaled: Vec<f64> = xs.iter().map(|x| 3.7 * x).collect();
    let b = entropy_from_values(&scaled);
    assert!((a.mean - b.mean).abs() < 1e-12);
    assert!((a.se - b.se).abs() < 1e-12);
    assert!(entropy_from_values(&[2.0; 200]).mean.abs() < 1e-15);
}

#[test]
fn linear_energy_is_the_time() {
    let m = ManifoldModel::euclidean(1).unwrap();
    let f = LocalizedFunction::plain(linear(&m, 0.5, 0).unwrap());
    let e = estimate_dirichlet(&m, &f, &cfg(200, 64, 1)).unwrap();
    assert!((e.mean - 0.5).abs() < 1e-14 && e.se < 1e-14);
}

#[test]
fn constants_have_no_energy_and_are_excluded() {
    let m = ManifoldModel::sphere2();
    let one = LocalizedFunction::plain(CylinderFunction::constant(1.0));
    let c = cfg(100, 32, 2);
    assert_eq!(estimate_dirichlet(&m, &one, &c).unwrap().mean, 0.0);
    assert_eq!(estimate_damped_dirichlet(&m, &one, &c).unwrap().mean, 0.0);
    assert_eq!(estimate_entropy(&m, &one, &c).unwrap().mean, 0.0);
    let r = verify_lsi_damped(&m, std::slice::from_ref(&one), &c).unwrap();
    assert!(r.pass);
    let p = verify_poincare(&m, &[one], &c).unwrap();
    assert!(p.pass && p.functions[0].flag.is_some() && p.fitted_constant.is_none());
}

#[test]
fn default_suite_checks_run_and_pass_at_small_scale() {
    let m = ManifoldModel::hyperbolic2();
    let suite = default_suite(&m).unwrap();
    let c = cfg(400, 64, 3);
    let s = collect_samples(&m, &suite, &c).unwrap();
    assert_eq!(s.functions.len(), 5);
    assert!(lsi_damped_report(&s, &c).pass);
    assert!(weighted_lsi_report(&s, &c).pass);
    let p = poincare_report(&s, &c);
    assert!(p.fitted_constant.unwrap().is_finite());
}

#[test]
fn report_margin_definition() {
    let m = ManifoldModel::euclidean(1).unwrap();
    let f = LocalizedFunction::plain(gaussian_exponential(&m, 1.0, 1.0).unwrap());
    let c = cfg(500, 64, 4);
    let r = verify_lsi_damped(&m, &[f], &c).unwrap();
    let fr = &r.functions[0];
    let want = fr.rhs.mean + c.ci * (fr.lhs.se + fr.rhs.se) + c.slack * fr.rhs.mean.max(1.0) - fr.lhs.mean;
    assert_eq!(fr.margin, want);
    assert_eq!(fr.pass, fr.margin >= 0.0);
}

#[test]
fn tail_limits() {
    let m = ManifoldModel::euclidean(1).unwrap();
    let c = cfg(300, 64, 5);
    assert_eq!(tail_probability(&m, 0.0, &c).unwrap().mean, 1.0);
    assert_eq!(tail_probability(&m, 10.0, &c).unwrap().mean, 0.0);
    let rho = sample_rho(&m, &c).unwrap();
    let a = tail_from_samples(&rho, 1.0).mean;
    let b = tail_from_samples(&rho, 2.0).mean;
    assert!(a >= b);
}

#[test]
fn standard_error_shrinks_with_paths() {
    let m = ManifoldModel::sphere2();
    let f = LocalizedFunction::plain(linear(&m, 1.0, 2).unwrap());
    let small = collect_samples(&m, std::slice::from_ref(&f), &cfg(1000, 32, 6)).unwrap();
    let large = collect_samples(&m, std::slice::from_ref(&f), &cfg(4000, 32, 6)).unwrap();
    let s1 = Estimate::from_samples(&small.functions[0].values).se;
    let s4 = Estimate::from_samples(&large.functions[0].values).se;
    let ratio = s1 / s4;
    assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
}
