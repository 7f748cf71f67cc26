//! Monte-Carlo estimators of Dirichlet forms, entropy and variance, and the
//! inequality checks built on them.
//!
//! Every check is one-sided: with `lhs` and `rhs` estimated from the same
//! paths, a function passes when
//!
//! ```text
//! margin = rhs + ci·(se_lhs + se_rhs) + slack·max(1, rhs) − lhs ≥ 0.
//! ```
//!
//! Entropies and Dirichlet forms are self-normalised by `μ̂(F²)`, i.e. the
//! inequalities are checked for `F/‖F‖_{L²}`; standard errors of the ratios
//! come from the delta method.

pub mod rates;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ManifoldModel;
use crate::malliavin::{damped_apply, localized_gradient, LocalizedFunction};
use crate::mc::{map_paths, mean, Estimate};
use crate::pathsim::{path_ricci_extremes, phi_flow, rho, roll_path, TimeGrid, DEFAULT_STEPS};

/// Sampling and verdict parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core. Never affects results.
    pub workers: usize,
    /// Discretisation slack `ε_disc`.
    pub slack: f64,
    /// Confidence multiplier applied to the summed standard errors.
    pub ci: f64,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig {
            paths: 10_000,
            steps: DEFAULT_STEPS,
            seed: 0,
            workers: 0,
            slack: 1e-2,
            ci: 3.0,
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 100 {
            return Err(Error::Argument(format!("need at least 100 paths, got {}", self.paths)));
        }
        if !(self.slack.is_finite() && self.slack >= 0.0) {
            return Err(Error::Argument(format!("slack {} must be >= 0", self.slack)));
        }
        if !(self.ci.is_finite() && self.ci >= 0.0) {
            return Err(Error::Argument(format!("CI multiplier {} must be >= 0", self.ci)));
        }
        TimeGrid::new(self.steps)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.steps)
    }
}

/// Per-path samples of one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSamples {
    pub name: String,
    /// `F(γ)`.
    pub values: Vec<f64>,
    /// `‖DF(γ)‖²_H`.
    pub dirichlet: Vec<f64>,
    /// `‖Â(γ)DF(γ)‖²_H`.
    pub damped: Vec<f64>,
    /// Paths on which the `ρ^m` argmax was tied.
    pub ties: usize,
}

/// Samples of a whole suite on a common set of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSamples {
    /// `K(γ)` per path.
    pub k: Vec<f64>,
    /// `K₁(γ)` per path.
    pub k1: Vec<f64>,
    /// `ρ(γ)` per path.
    pub rho: Vec<f64>,
    pub functions: Vec<FunctionSamples>,
}

impl SuiteSamples {
    /// `4 + K(γ)²·e^{−K₁(γ)}` per path.
    pub fn weights(&self) -> Vec<f64> {
        self.k.iter().zip(&self.k1).map(|(k, k1)| 4.0 + k * k * (-k1).exp()).collect()
    }
}

struct PathSample {
    k: f64,
    k1: f64,
    rho: f64,
    per_fn: Vec<(f64, f64, f64, bool)>,
}

/// Rolls `cfg.paths` paths once and evaluates every function of `suite` on them.
pub fn collect_samples(model: &ManifoldModel, suite: &[LocalizedFunction], cfg: &MCConfig) -> Result<SuiteSamples> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let rows = map_paths(cfg.paths, cfg.workers, |i| {
        let path = roll_path(model, grid, cfg.seed, i)?;
        let flow = phi_flow(model, &path)?;
        let (k, k1) = path_ricci_extremes(model, &path);
        let mut per_fn = Vec::with_capacity(suite.len());
        for f in suite {
            let v = f.eval(model, &path)?;
            let g = localized_gradient(model, f, &path)?;
            let d = g.gradient.norm_sq();
            let a = damped_apply(&flow, &g.gradient)?.norm_sq();
            per_fn.push((v, d, a, g.tie));
        }
        Ok(PathSample {
            k,
            k1,
            rho: rho(model, &path),
            per_fn,
        })
    })?;
    let functions = suite
        .iter()
        .enumerate()
        .map(|(j, f)| FunctionSamples {
            name: f.name().to_string(),
            values: rows.iter().map(|r| r.per_fn[j].0).collect(),
            dirichlet: rows.iter().map(|r| r.per_fn[j].1).collect(),
            damped: rows.iter().map(|r| r.per_fn[j].2).collect(),
            ties: rows.iter().filter(|r| r.per_fn[j].3).count(),
        })
        .collect();
    Ok(SuiteSamples {
        k: rows.iter().map(|r| r.k).collect(),
        k1: rows.iter().map(|r| r.k1).collect(),
        rho: rows.iter().map(|r| r.rho).collect(),
        functions,
    })
}

fn single(model: &ManifoldModel, f: &LocalizedFunction, cfg: &MCConfig) -> Result<FunctionSamples> {
    let mut s = collect_samples(model, std::slice::from_ref(f), cfg)?;
    Ok(s.functions.remove(0))
}

/// `E(F,F) = μ(‖DF‖²_H)`.
pub fn estimate_dirichlet(model: &ManifoldModel, f: &LocalizedFunction, cfg: &MCConfig) -> Result<Estimate> {
    Ok(Estimate::from_samples(&single(model, f, cfg)?.dirichlet))
}

/// `E_Λ(F,F) = μ(‖ÂDF‖²_H)`.
pub fn estimate_damped_dirichlet(model: &ManifoldModel, f: &LocalizedFunction, cfg: &MCConfig) -> Result<Estimate> {
    Ok(Estimate::from_samples(&single(model, f, cfg)?.damped))
}

/// `Ent(F²)/μ(F²)`, which is invariant under `F ↦ cF`.
pub fn estimate_entropy(model: &ManifoldModel, f: &LocalizedFunction, cfg: &MCConfig) -> Result<Estimate> {
    Ok(entropy_from_values(&single(model, f, cfg)?.values))
}

fn xlogx(y: f64) -> f64 {
    if y > 0.0 {
        y * y.ln()
    } else {
        0.0
    }
}

/// Plug-in `Ent(F²)/μ̂(F²)` with a delta-method standard error.
pub fn entropy_from_values(values: &[f64]) -> Estimate {
    let y: Vec<f64> = values.iter().map(|v| v * v).collect();
    let ylog: Vec<f64> = y.iter().map(|&v| xlogx(v)).collect();
    let (a, b) = (mean(&ylog), mean(&y));
    if !(b > 0.0) {
        return Estimate { mean: 0.0, se: 0.0, n: y.len() };
    }
    let ent = a / b - b.ln();
    let gb = -a / (b * b) - 1.0 / b;
    let z: Vec<f64> = y.iter().zip(&ylog).map(|(yi, li)| (li - a) / b + gb * (yi - b)).collect();
    Estimate::with_influence(ent, &z)
}

/// `c·μ̂(X)/μ̂(F²)` with a delta-method standard error.
fn normalized_mean(c: f64, x: &[f64], values: &[f64]) -> Estimate {
    let y: Vec<f64> = values.iter().map(|v| v * v).collect();
    let (mx, b) = (mean(x), mean(&y));
    if !(b > 0.0) {
        return Estimate { mean: 0.0, se: 0.0, n: y.len() };
    }
    let r = c * mx / b;
    let z: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| c * (xi - mx) / b - c * mx / (b * b) * (yi - b))
        .collect();
    Estimate::with_influence(r, &z)
}

/// Verdict on one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub name: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub margin: f64,
    pub pass: bool,
    /// Set when the function was excluded or needs attention.
    pub flag: Option<String>,
}

impl FunctionReport {
    fn judge(name: &str, lhs: Estimate, rhs: Estimate, cfg: &MCConfig) -> Self {
        let margin = rhs.mean + cfg.ci * (lhs.se + rhs.se) + cfg.slack * rhs.mean.max(1.0) - lhs.mean;
        FunctionReport {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            pass: margin >= 0.0,
            flag: None,
        }
    }
}

/// Outcome of one inequality check over a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub id: String,
    /// The function with the smallest margin (headline numbers).
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub margin: f64,
    pub pass: bool,
    pub functions: Vec<FunctionReport>,
    pub ci: f64,
    pub slack: f64,
    /// Fitted constant (Poincaré only).
    pub fitted_constant: Option<f64>,
    pub warnings: Vec<String>,
}

impl InequalityReport {
    fn assemble(id: &str, functions: Vec<FunctionReport>, cfg: &MCConfig) -> Self {
        let judged: Vec<&FunctionReport> = functions.iter().filter(|f| f.flag.is_none() || f.pass).collect();
        let worst = judged.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)).copied();
        let (lhs, rhs, margin) = match worst {
            Some(w) => (w.lhs, w.rhs, w.margin),
            None => (Estimate::exact(0.0), Estimate::exact(0.0), 0.0),
        };
        InequalityReport {
            id: id.to_string(),
            lhs,
            rhs,
            margin,
            pass: functions.iter().all(|f| f.pass),
            functions,
            ci: cfg.ci,
            slack: cfg.slack,
            fitted_constant: None,
            warnings: Vec::new(),
        }
    }
}

fn with_tie_flags(mut reports: Vec<FunctionReport>, samples: &SuiteSamples) -> Vec<FunctionReport> {
    for (r, s) in reports.iter_mut().zip(&samples.functions) {
        if s.ties > 0 && r.flag.is_none() {
            r.flag = Some(format!("rho_m argmax tied on {} paths", s.ties));
        }
    }
    reports
}

/// `Ent(F²) ≤ 2·E_Λ(F,F)` on pre-collected samples.
pub fn lsi_damped_report(samples: &SuiteSamples, cfg: &MCConfig) -> InequalityReport {
    let fns = samples
        .functions
        .iter()
        .map(|s| {
            let lhs = entropy_from_values(&s.values);
            let rhs = normalized_mean(2.0, &s.damped, &s.values);
            FunctionReport::judge(&s.name, lhs, rhs, cfg)
        })
        .collect();
    InequalityReport::assemble("lsi", with_tie_flags(fns, samples), cfg)
}

/// `Ent(F²) ≤ μ((4 + K²e^{−K₁})‖DF‖²)` on pre-collected samples.
pub fn weighted_lsi_report(samples: &SuiteSamples, cfg: &MCConfig) -> InequalityReport {
    let w = samples.weights();
    let fns = samples
        .functions
        .iter()
        .map(|s| {
            let x: Vec<f64> = s.dirichlet.iter().zip(&w).map(|(d, w)| d * w).collect();
            let lhs = entropy_from_values(&s.values);
            let rhs = normalized_mean(1.0, &x, &s.values);
            FunctionReport::judge(&s.name, lhs, rhs, cfg)
        })
        .collect();
    InequalityReport::assemble("weighted-lsi", with_tie_flags(fns, samples), cfg)
}

/// Energies below this are treated as zero by the Poincaré check.
pub const NEGLIGIBLE_ENERGY: f64 = 1e-12;

/// Ratio `Var(F)/E(F,F)` with its delta-method standard error.
pub fn variance_ratio(values: &[f64], energy: &[f64]) -> (Estimate, Estimate, Estimate) {
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    let var = Estimate::from_samples(&dev);
    let e = Estimate::from_samples(energy);
    let ratio = if e.mean > 0.0 {
        let q = var.mean / e.mean;
        let z: Vec<f64> = dev
            .iter()
            .zip(energy)
            .map(|(d, en)| (d - var.mean) / e.mean - q / e.mean * (en - e.mean))
            .collect();
        Estimate::with_influence(q, &z)
    } else {
        Estimate::exact(f64::INFINITY)
    };
    (var, e, ratio)
}

/// `Var(F) ≤ c·E(F,F)` with `c` the largest ratio over the suite.
pub fn poincare_report(samples: &SuiteSamples, cfg: &MCConfig) -> InequalityReport {
    let parts: Vec<(String, Estimate, Estimate, Estimate)> = samples
        .functions
        .iter()
        .map(|s| {
            let (v, e, r) = variance_ratio(&s.values, &s.dirichlet);
            (s.name.clone(), v, e, r)
        })
        .collect();
    let fitted = parts
        .iter()
        .filter(|p| p.2.mean > NEGLIGIBLE_ENERGY)
        .map(|p| p.3.mean)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    let c = fitted.unwrap_or(0.0);
    let fns = parts
        .into_iter()
        .map(|(name, var, e, _)| {
            if e.mean <= NEGLIGIBLE_ENERGY {
                let mut r = FunctionReport::judge(&name, var, Estimate::exact(0.0), cfg);
                r.flag = Some("excluded: E(F,F) is negligible".into());
                r.pass = true;
                return r;
            }
            let rhs = Estimate { mean: c * e.mean, se: c * e.se, n: e.n };
            FunctionReport::judge(&name, var, rhs, cfg)
        })
        .collect();
    let mut report = InequalityReport::assemble("poincare", fns, cfg);
    report.fitted_constant = fitted;
    if fitted.is_none() {
        report.warnings.push("no function with positive energy; constant undetermined".into());
    }
    report
}

pub fn verify_lsi_damped(model: &ManifoldModel, suite: &[LocalizedFunction], cfg: &MCConfig) -> Result<InequalityReport> {
    Ok(lsi_damped_report(&collect_samples(model, suite, cfg)?, cfg))
}

pub fn verify_weighted_lsi(model: &ManifoldModel, suite: &[LocalizedFunction], cfg: &MCConfig) -> Result<InequalityReport> {
    Ok(weighted_lsi_report(&collect_samples(model, suite, cfg)?, cfg))
}

pub fn verify_poincare(model: &ManifoldModel, suite: &[LocalizedFunction], cfg: &MCConfig) -> Result<InequalityReport> {
    let mut report = poincare_report(&collect_samples(model, suite, cfg)?, cfg);
    let growth = model.profile().growth_exponent();
    if growth > 2.0 {
        report
            .warnings
            .push(format!("2δ1+δ2 = {growth} exceeds 2; the Poincaré inequality is not guaranteed"));
    }
    Ok(report)
}

/// Samples `ρ(γ)` on `cfg.paths` paths.
pub fn sample_rho(model: &ManifoldModel, cfg: &MCConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    map_paths(cfg.paths, cfg.workers, |i| Ok(rho(model, &roll_path(model, grid, cfg.seed, i)?)))
}

/// `μ(ρ > R)` from samples of `ρ`.
pub fn tail_from_samples(rho: &[f64], radius: f64) -> Estimate {
    let ind: Vec<f64> = rho.iter().map(|&r| if r > radius { 1.0 } else { 0.0 }).collect();
    Estimate::from_samples(&ind)
}

pub fn tail_probability(model: &ManifoldModel, radius: f64, cfg: &MCConfig) -> Result<Estimate> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::Argument(format!("radius {radius} must be >= 0")));
    }
    Ok(tail_from_samples(&sample_rho(model, cfg)?, radius))
}

#[cfg(test)]
mod tests;
