//! Diagonal diffusion operators on the Haar basis of the Cameron–Martin space.
//!
//! `A H_m = λ_m H_m`, so `A^{1/2}h = Σ λ_m^{1/2}⟨h, H_m⟩H_m` and the form
//! `E_A(F, F) = μ(Σ_m λ_m⟨DF, H_m⟩²)`. Everything is computed on the
//! truncation through Haar level `L`, i.e. on the first `n·2^{L+1}` modes.

use serde::{Deserialize, Serialize};

use crate::cmspace::{mode_count, project_haar, synthesize_haar, CMVector, HaarIndex};
use crate::error::{Error, Result};
use crate::geometry::ManifoldModel;
use crate::inequalities::MCConfig;
use crate::malliavin::{localized_gradient, LocalizedFunction};
use crate::mc::{map_paths, Estimate};
use crate::pathsim::{rho, roll_path};

/// Tolerance of the wedge-vector bound.
pub const WEDGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EigenProfile {
    /// `λ_m = c·m^{1−δ}`.
    Power { c: f64, delta: f64 },
    /// `λ_1, λ_2, …` up to the table length.
    Table(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOperator {
    profile: EigenProfile,
    /// Eigenvalues are multiplied by `1{ρ(γ) ≤ R}` when set.
    ball: Option<f64>,
}

impl DiagonalOperator {
    /// Closed-form profile; `δ = 0` (linear growth) is accepted as the boundary case.
    pub fn power(c: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !(0.0..=1.0).contains(&delta) {
            return Err(Error::Argument(format!("power profile needs c > 0 and delta in [0, 1], got c={c}, delta={delta}")));
        }
        Ok(DiagonalOperator {
            profile: EigenProfile::Power { c, delta },
            ball: None,
        })
    }

    pub fn identity() -> Self {
        DiagonalOperator {
            profile: EigenProfile::Power { c: 1.0, delta: 1.0 },
            ball: None,
        }
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Argument("eigenvalue table must be non-empty, finite and nonnegative".into()));
        }
        Ok(DiagonalOperator {
            profile: EigenProfile::Table(values),
            ball: None,
        })
    }

    pub fn with_ball(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Argument(format!("ball radius {radius} must be positive")));
        }
        self.ball = Some(radius);
        Ok(self)
    }

    pub fn profile(&self) -> &EigenProfile {
        &self.profile
    }

    pub fn ball(&self) -> Option<f64> {
        self.ball
    }

    /// `λ_m` for `m ≥ 1`.
    pub fn eigenvalue(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(Error::Argument("Haar indices start at 1".into()));
        }
        match &self.profile {
            EigenProfile::Power { c, delta } => Ok(c * (m as f64).powf(1.0 - delta)),
            EigenProfile::Table(t) => t.get(m - 1).copied().ok_or_else(|| {
                Error::Argument(format!("eigenvalue table has {} entries, index {m} requested", t.len()))
            }),
        }
    }

    /// `λ_1..λ_{n·2^{L+1}}`.
    pub fn eigenvalues(&self, n: usize, level: u32) -> Result<Vec<f64>> {
        (1..=mode_count(n, level)).map(|m| self.eigenvalue(m)).collect()
    }

    /// Path factor `1{ρ ≤ R}`.
    pub fn path_factor(&self, rho: f64) -> f64 {
        match self.ball {
            Some(r) if rho > r => 0.0,
            _ => 1.0,
        }
    }

    /// `min_m λ_m` on the truncation, a uniform lower bound `ε(R)` on the ball.
    pub fn floor(&self, n: usize, level: u32) -> Result<f64> {
        Ok(self.eigenvalues(n, level)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// `Σ_m λ_m c_m²`.
    pub fn quadratic_form(&self, coeffs: &[f64]) -> Result<f64> {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| Ok(self.eigenvalue(i + 1)? * c * c))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtResult {
    pub vector: CMVector,
    /// `‖h‖² − Σ_m ⟨h, H_m⟩²`, zero when `h` is dyadic at the level.
    pub residual: f64,
}

/// `A^{1/2}h` on the truncation through level `L`.
pub fn apply_sqrt(op: &DiagonalOperator, h: &CMVector, level: u32) -> Result<SqrtResult> {
    let coeffs = project_haar(h, level)?;
    let scaled: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| Ok(op.eigenvalue(i + 1)?.sqrt() * c))
        .collect::<Result<_>>()?;
    let captured: f64 = coeffs.iter().map(|c| c * c).sum();
    Ok(SqrtResult {
        vector: synthesize_haar(h.grid(), h.dim(), &scaled)?,
        residual: h.norm_sq() - captured,
    })
}

/// `∫₀ᵗ S_p`.
fn haar_primitive(p: usize, t: f64) -> f64 {
    let idx = HaarIndex { m: p, p, j: 1 };
    match idx.level() {
        None => t,
        Some((k, i)) => {
            let w = (0.5_f64).powi(k as i32);
            let a = (i - 1) as f64 * w;
            let mid = a + 0.5 * w;
            let amp = (2.0_f64).powf(k as f64 / 2.0);
            amp * ((t.min(mid) - a).max(0.0) - (t.min(a + w) - mid).max(0.0))
        }
    }
}

/// `⟨Ψ_{t,v}, H_m⟩` for `m = 1..=n·2^{L+1}`, computed in closed form.
pub fn wedge_coefficients(t: f64, v: &[f64], level: u32) -> Vec<f64> {
    let n = v.len();
    (1..=mode_count(n, level))
        .map(|m| {
            let p = (m - 1) / n + 1;
            haar_primitive(p, t) * v[(m - 1) % n]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeBound {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `‖A^{1/2}Ψ_{t,v}‖²` against the eigenvalue bound, both on the truncation.
pub fn wedge_bound_check(op: &DiagonalOperator, t: f64, v: &[f64], level: u32) -> Result<WedgeBound> {
    if !(0.0..=1.0).contains(&t) || v.is_empty() {
        return Err(Error::Argument(format!("need t in [0, 1] and a non-empty v, got t={t}")));
    }
    let n = v.len();
    let lhs = op.quadratic_form(&wedge_coefficients(t, v, level))?;
    let mut bracket = 0.0;
    for j in 1..=n {
        bracket += op.eigenvalue(j)?;
    }
    for k in 0..=level {
        let cells = 1usize << k;
        let w = 1.0 / cells as f64;
        let scaled = t * cells as f64;
        let i = scaled.floor() as usize + 1;
        // open interval ((i−1)2^{−k}, i·2^{−k}) contains t
        if scaled.fract() == 0.0 || i > cells {
            continue;
        }
        for j in 1..=n {
            bracket += op.eigenvalue(n * (cells + i - 1) + j)? * w;
        }
    }
    let rhs = bracket * v.iter().map(|x| x * x).sum::<f64>();
    Ok(WedgeBound {
        lhs,
        rhs,
        pass: lhs <= rhs + WEDGE_TOLERANCE,
    })
}

/// How `μ(λ_m 1_{B_R})` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BallWeight {
    /// `λ_m` treated as path-independent.
    Deterministic,
    /// `λ_m·μ(ρ ≤ R)` with a Monte Carlo ball probability.
    Path { ball_probability: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converges,
    Diverges,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summability {
    /// `n` and the levels summed.
    pub dim: usize,
    pub levels: u32,
    /// `Σ_j μ(λ_j 1_B)`.
    pub base: f64,
    /// Per level `k`, `max_i Σ_j μ(λ_{n(2^k+i−1)+j}1_B)·2^{−k}`: the level term seen by a fixed `t`.
    pub worst_blocks: Vec<f64>,
    /// Per level `k`, the sum of the level term over all `i`.
    pub full_blocks: Vec<f64>,
    /// `base + Σ_k worst_blocks[k]`.
    pub partial_sum: f64,
    /// `base + Σ_k full_blocks[k]`.
    pub full_partial_sum: f64,
    /// Bound on `Σ_{k > levels}` of the worst-case level terms (closed-form profiles).
    pub tail_bound: Option<f64>,
    pub verdict: Verdict,
}

/// Partial sums of the eigenvalue series through level `levels`.
///
/// The verdict concerns the worst case over `t`; the all-`i` sums are
/// reported alongside and grow without bound for any profile bounded below.
pub fn summability(op: &DiagonalOperator, n: usize, levels: u32, weight: BallWeight) -> Result<Summability> {
    if n == 0 {
        return Err(Error::Argument("dimension must be positive".into()));
    }
    let factor = match weight {
        BallWeight::Deterministic => 1.0,
        BallWeight::Path { ball_probability } => {
            if !(0.0..=1.0).contains(&ball_probability) {
                return Err(Error::Argument(format!("ball probability {ball_probability} outside [0, 1]")));
            }
            ball_probability
        }
    };
    let mut base = 0.0;
    for j in 1..=n {
        base += factor * op.eigenvalue(j)?;
    }
    let mut worst_blocks = Vec::with_capacity(levels as usize + 1);
    let mut full_blocks = Vec::with_capacity(levels as usize + 1);
    for k in 0..=levels {
        let cells = 1usize << k;
        let w = 1.0 / cells as f64;
        let (mut worst, mut full) = (0.0_f64, 0.0);
        for i in 1..=cells {
            let mut s = 0.0;
            for j in 1..=n {
                s += factor * op.eigenvalue(n * (cells + i - 1) + j)? * w;
            }
            worst = worst.max(s);
            full += s;
        }
        worst_blocks.push(worst);
        full_blocks.push(full);
    }
    let partial_sum = base + worst_blocks.iter().sum::<f64>();
    let full_partial_sum = base + full_blocks.iter().sum::<f64>();
    let (tail_bound, verdict) = match op.profile {
        EigenProfile::Power { c, delta } => {
            let nf = n as f64;
            if delta > 0.0 {
                let b = factor * nf * c * (2.0 * nf).powf(1.0 - delta) * (2.0_f64).powf(-((levels + 1) as f64) * delta)
                    / (1.0 - (2.0_f64).powf(-delta));
                (Some(b), Verdict::Converges)
            } else if factor > 0.0 {
                // every level term is at least c·n², so the series diverges
                (Some(f64::INFINITY), Verdict::Diverges)
            } else {
                (Some(0.0), Verdict::Converges)
            }
        }
        EigenProfile::Table(_) => (None, Verdict::Undetermined),
    };
    Ok(Summability {
        dim: n,
        levels,
        base,
        worst_blocks,
        full_blocks,
        partial_sum,
        full_partial_sum,
        tail_bound,
        verdict,
    })
}

/// Per-path `Σ_m λ_m(γ)⟨DF, H_m⟩²`, `‖DF‖²` and `ρ(γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaSamples {
    pub ea: Vec<f64>,
    pub energy: Vec<f64>,
    pub rho: Vec<f64>,
}

fn check_dyadic(f: &LocalizedFunction, level: u32) -> Result<()> {
    let scale = (1u64 << (level + 1)) as f64;
    let mut times: Vec<f64> = f.base.times().to_vec();
    if let Some((_, t)) = &f.cutoff {
        times.extend_from_slice(t);
    }
    for t in times {
        let s = t * scale;
        if (s - s.round()).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "time {t} is not a multiple of 2^-{}; the gradient is not representable at level {level}",
                level + 1
            )));
        }
    }
    Ok(())
}

pub fn ea_samples(
    model: &ManifoldModel,
    op: &DiagonalOperator,
    f: &LocalizedFunction,
    cfg: &MCConfig,
    level: u32,
) -> Result<EaSamples> {
    cfg.validate()?;
    check_dyadic(f, level)?;
    let grid = cfg.grid()?;
    grid.check_haar_level(level)?;
    let lambda = op.eigenvalues(model.dim(), level)?;
    let rows = map_paths(cfg.paths, cfg.workers, |i| {
        let path = roll_path(model, grid, cfg.seed, i)?;
        let g = localized_gradient(model, f, &path)?.gradient;
        let coeffs = project_haar(&g, level)?;
        let r = rho(model, &path);
        let ea: f64 = coeffs.iter().zip(&lambda).map(|(c, l)| l * c * c).sum();
        Ok((op.path_factor(r) * ea, g.norm_sq(), r))
    })?;
    Ok(EaSamples {
        ea: rows.iter().map(|r| r.0).collect(),
        energy: rows.iter().map(|r| r.1).collect(),
        rho: rows.iter().map(|r| r.2).collect(),
    })
}

/// `E_A(F, F)` on the truncation through level `L`.
pub fn estimate_ea(
    model: &ManifoldModel,
    op: &DiagonalOperator,
    f: &LocalizedFunction,
    cfg: &MCConfig,
    level: u32,
) -> Result<Estimate> {
    Ok(Estimate::from_samples(&ea_samples(model, op, f, cfg, level)?.ea))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorCheck {
    pub radius: f64,
    pub epsilon: f64,
    pub paths_in_ball: usize,
    /// `min E_A/E` over paths in the ball with nonzero energy.
    pub worst_ratio: Option<f64>,
    pub pass: bool,
}

/// `Σλ_m⟨DF,H_m⟩² ≥ ε·‖DF‖²` on every sampled path with `ρ ≤ R`.
pub fn floor_check(samples: &EaSamples, radius: f64, epsilon: f64) -> FloorCheck {
    let mut paths_in_ball = 0;
    let mut worst: Option<f64> = None;
    let mut pass = true;
    for ((ea, e), r) in samples.ea.iter().zip(&samples.energy).zip(&samples.rho) {
        if *r > radius {
            continue;
        }
        paths_in_ball += 1;
        pass &= *ea >= epsilon * e * (1.0 - 1e-12);
        if *e > 0.0 {
            let q = ea / e;
            worst = Some(worst.map_or(q, |w| w.min(q)));
        }
    }
    FloorCheck {
        radius,
        epsilon,
        paths_in_ball,
        worst_ratio: worst,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmspace::{haar_vector, wedge_vector};
    use crate::inequalities::estimate_dirichlet;
    use crate::malliavin::suite::{default_suite, linear};
    use crate::mc::PathStream;
    use crate::pathsim::TimeGrid;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(n).unwrap()
    }

    fn dyadic_h(n: usize, level: u32, seed: u64) -> CMVector {
        let g = grid(256);
        let modes = mode_count(n, level);
        let mut s = PathStream::new(seed, 0, modes);
        let mut c = vec![0.0; modes];
        s.normals(0, 1.0, &mut c);
        synthesize_haar(g, n, &c).unwrap()
    }

    fn cfg(paths: usize, steps: usize, seed: u64) -> MCConfig {
        MCConfig {
            paths,
            steps,
            seed,
            ..MCConfig::default()
        }
    }

    #[test]
    fn sqrt_examples() {
        let h = dyadic_h(2, 6, 1);
        let one = apply_sqrt(&DiagonalOperator::identity(), &h, 6).unwrap();
        assert!(one.residual.abs() < 1e-10);
        let d = one.vector.add_scaled(-1.0, &h).unwrap().norm();
        assert!(d < 1e-12, "{d}");

        let lin = DiagonalOperator::power(1.0, 0.0).unwrap();
        let h3 = haar_vector(grid(64), 1, 3).unwrap();
        let r = apply_sqrt(&lin, &h3, 4).unwrap();
        assert!((r.vector.norm_sq() - 3.0).abs() < 1e-12);
        let want = h3.scaled(3.0_f64.sqrt());
        assert!(r.vector.add_scaled(-1.0, &want).unwrap().norm() < 1e-12);
    }

    #[test]
    fn sqrt_parseval() {
        let ops = [
            DiagonalOperator::power(0.7, 0.3).unwrap(),
            DiagonalOperator::power(2.0, 0.0).unwrap(),
            DiagonalOperator::table((0..512).map(|i| 0.1 + (i as f64 * 0.77).sin().abs()).collect()).unwrap(),
        ];
        for (s, op) in ops.iter().enumerate() {
            for n in [1, 2] {
                let h = dyadic_h(n, 6, 10 + s as u64);
                let r = apply_sqrt(op, &h, 6).unwrap();
                let q = op.quadratic_form(&project_haar(&h, 6).unwrap()).unwrap();
                assert!((r.vector.norm_sq() - q).abs() < 1e-10 * (1.0 + q));
            }
        }
    }

    #[test]
    fn sqrt_reports_projection_residual() {
        // derivative varies inside the finest level-2 cells
        let g = grid(32);
        let d: Vec<f64> = (0..32).map(|k| k as f64 / 32.0).collect();
        let h = CMVector::from_derivative(g, 1, d).unwrap();
        let r = apply_sqrt(&DiagonalOperator::identity(), &h, 2).unwrap();
        assert!(r.residual > 1e-4);
        assert!(apply_sqrt(&DiagonalOperator::identity(), &h, 6).is_err());
    }

    #[test]
    fn wedge_coefficients_match_grid_projection() {
        let g = grid(128);
        for t in [0.0, 0.25, 0.375, 0.5, 0.8125, 1.0] {
            let v = [0.6, -1.3];
            let exact = wedge_coefficients(t, &v, 5);
            let proj = project_haar(&wedge_vector(g, t, &v).unwrap(), 5).unwrap();
            for (a, b) in exact.iter().zip(&proj) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wedge_bound_examples() {
        let one = DiagonalOperator::identity();
        let r = wedge_bound_check(&one, 1.0, &[1.0], 6).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-14 && r.rhs >= 1.0 && r.pass);
        let z = wedge_bound_check(&one, 0.0, &[0.3, 0.4], 6).unwrap();
        assert_eq!(z.lhs, 0.0);
        assert!(z.pass);
        // t = 3/8 lies in an open cell at levels 0, 1 and 2 only
        let w = wedge_bound_check(&one, 0.375, &[1.0], 6).unwrap();
        assert!((w.rhs - 2.75).abs() < 1e-14, "{}", w.rhs);
        assert!(w.pass);
    }

    #[test]
    fn wedge_bound_random_tables() {
        let level = 6;
        for draw in 0..1000u64 {
            let n = 1 + (draw % 3) as usize;
            let modes = mode_count(n, level);
            let mut s = PathStream::new(77, draw, modes + n + 1);
            let mut z = vec![0.0; modes + n + 1];
            s.normals(0, 1.0, &mut z);
            let table: Vec<f64> = z[..modes].iter().map(|x| x * x).collect();
            let op = DiagonalOperator::table(table).unwrap();
            let t = 0.5 * (1.0 + (z[modes] * 0.8).tanh());
            let v = &z[modes + 1..];
            assert!(wedge_bound_check(&op, t, v, level).unwrap().pass);
        }
    }

    #[test]
    fn summability_verdicts() {
        for (delta, want) in [(0.0, Verdict::Diverges), (0.1, Verdict::Converges), (0.5, Verdict::Converges), (1.0, Verdict::Converges)] {
            let op = DiagonalOperator::power(1.0, delta).unwrap();
            let s = summability(&op, 2, 10, BallWeight::Deterministic).unwrap();
            assert_eq!(s.verdict, want, "delta {delta}");
        }
        let t = DiagonalOperator::table(vec![1.0; 64]).unwrap();
        assert_eq!(summability(&t, 1, 4, BallWeight::Deterministic).unwrap().verdict, Verdict::Undetermined);
        assert!(summability(&t, 1, 6, BallWeight::Deterministic).is_err());
    }

    #[test]
    fn summability_block_asymptotics() {
        // δ = 0, n = 1: the worst level-k term is (2^{k+1})·2^{−k} = 2
        let lin = DiagonalOperator::power(1.0, 0.0).unwrap();
        let s = summability(&lin, 1, 12, BallWeight::Deterministic).unwrap();
        for b in &s.worst_blocks {
            assert!((b - 2.0).abs() < 1e-12);
        }
        // all-i sums: Σ_{i} (2^k + i)·2^{−k} = 2^k + (2^k + 1)/2
        for (k, b) in s.full_blocks.iter().enumerate() {
            let c = (1u64 << k) as f64;
            assert!((b - (c + (c + 1.0) / 2.0)).abs() < 1e-9 * c);
        }
        // λ ≡ 1: every level contributes n over all i
        let one = DiagonalOperator::identity();
        let s = summability(&one, 3, 8, BallWeight::Deterministic).unwrap();
        assert!(s.full_blocks.iter().all(|b| (b - 3.0).abs() < 1e-12));
        assert!(s.worst_blocks.iter().enumerate().all(|(k, b)| (b - 3.0 * 0.5f64.powi(k as i32)).abs() < 1e-12));
    }

    #[test]
    fn summability_tail_bound_dominates_remaining_terms() {
        for delta in [0.1, 0.5, 1.0] {
            let op = DiagonalOperator::power(1.3, delta).unwrap();
            let short = summability(&op, 2, 6, BallWeight::Deterministic).unwrap();
            let long = summability(&op, 2, 16, BallWeight::Deterministic).unwrap();
            let remaining = long.partial_sum - short.partial_sum;
            assert!(remaining <= short.tail_bound.unwrap(), "delta {delta}");
            assert!(long.tail_bound.unwrap() < short.tail_bound.unwrap());
        }
        let op = DiagonalOperator::power(1.0, 0.5).unwrap();
        let d = summability(&op, 1, 6, BallWeight::Deterministic).unwrap();
        let p = summability(&op, 1, 6, BallWeight::Path { ball_probability: 0.25 }).unwrap();
        assert!((p.partial_sum - 0.25 * d.partial_sum).abs() < 1e-12);
    }

    #[test]
    fn ea_identity_matches_dirichlet() {
        let m = ManifoldModel::sphere2();
        let c = cfg(150, 128, 3);
        for f in default_suite(&m).unwrap() {
            let s = ea_samples(&m, &DiagonalOperator::identity(), &f, &c, 6).unwrap();
            for (a, b) in s.ea.iter().zip(&s.energy) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b));
            }
            let e = estimate_dirichlet(&m, &f, &c).unwrap();
            assert!((Estimate::from_samples(&s.ea).mean - e.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn ea_flat_examples() {
        let m = ManifoldModel::euclidean(1).unwrap();
        let c = cfg(100, 128, 4);
        let op = DiagonalOperator::power(1.0, 0.0).unwrap();
        let f1 = LocalizedFunction::plain(linear(&m, 1.0, 0).unwrap());
        let e1 = estimate_ea(&m, &op, &f1, &c, 6).unwrap();
        assert!((e1.mean - 1.0).abs() < 1e-12 && e1.se < 1e-12);
        // brute force over Haar coefficients of (s ∧ 1/2)
        let f2 = LocalizedFunction::plain(linear(&m, 0.5, 0).unwrap());
        let want: f64 = project_haar(&wedge_vector(grid(128), 0.5, &[1.0]).unwrap(), 6)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, c)| (i + 1) as f64 * c * c)
            .sum();
        let e2 = estimate_ea(&m, &op, &f2, &c, 6).unwrap();
        assert!((e2.mean - want).abs() < 1e-12, "{} vs {want}", e2.mean);
        let odd = LocalizedFunction::plain(linear(&m, 0.3, 0).unwrap());
        assert!(estimate_ea(&m, &op, &odd, &cfg(100, 640, 4), 6).is_err());
    }

    #[test]
    fn ea_dominates_floor_on_ball() {
        let m = ManifoldModel::hyperbolic2();
        let op = DiagonalOperator::power(0.4, 0.5).unwrap().with_ball(3.0).unwrap();
        let eps = op.floor(m.dim(), 6).unwrap();
        assert!((eps - 0.4).abs() < 1e-15);
        for f in default_suite(&m).unwrap() {
            let s = ea_samples(&m, &op, &f, &cfg(200, 128, 9), 6).unwrap();
            let fc = floor_check(&s, 3.0, eps);
            assert!(fc.pass && fc.paths_in_ball > 0, "{}", f.name());
        }
    }
}
