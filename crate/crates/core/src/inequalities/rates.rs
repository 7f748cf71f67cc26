//! Curvature-to-rate pipeline for the weak log-Sobolev and super-Poincaré inequalities.
//!
//! With `w(s) = 4 + K̃(s)²e^{−K̃₁(s)}` and `I(a, b) = ∫_a^b w^{−1/2}`:
//!
//! ```text
//! θ(r)   = I(R₁, R₁∨r) / √μ(ρ>R₁)
//! g_R(r) = (1 − θ(r)/θ(R))⁺
//! Λ_r    = { R : inf_{R₁<R} 2μ(ρ>R₁)/I(R₁,R)² + 3√μ(ρ>R₁) ≤ r }
//! α(r)   = inf_{R∈Λ_r} 2·w(R)
//! β(r)   = exp(c₃(1 + r^{−2/(2−2δ₁−δ₂)}))
//! ```
//!
//! Membership in `Λ_r` is decided in log space so that `r` can go down to
//! the smallest normal doubles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CurvatureProfile;

/// Source of `μ(ρ > R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TailMode {
    /// `C₁·e^{−C₂R²}`.
    Analytic { c1: f64, c2: f64 },
    /// Empirical tail from sampled values of `ρ` (sorted on construction).
    MonteCarlo { rho: Vec<f64> },
}

impl TailMode {
    pub fn monte_carlo(mut rho: Vec<f64>) -> Self {
        rho.sort_by(f64::total_cmp);
        TailMode::MonteCarlo { rho }
    }

    /// `ln μ(ρ > R)`; a zero empirical tail is a pipeline error.
    pub fn log_tail(&self, radius: f64) -> Result<f64> {
        match self {
            TailMode::Analytic { c1, c2 } => Ok(c1.ln() - c2 * radius * radius),
            TailMode::MonteCarlo { rho } => {
                let above = rho.len() - rho.partition_point(|&r| r <= radius);
                if above == 0 {
                    return Err(Error::Pipeline(format!(
                        "empirical tail at R = {radius} is zero; increase the number of paths or use the analytic tail"
                    )));
                }
                Ok((above as f64 / rho.len() as f64).ln())
            }
        }
    }
}

// 8-point Gauss–Legendre rule on [−1, 1]
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Width of the panels of the cumulative rate integral.
const PANEL: f64 = 0.05;

/// Default upper end of the `R` scan.
pub const DEFAULT_MAX_RADIUS: f64 = 100.0;
/// Default number of `R` grid points.
pub const DEFAULT_RADIUS_POINTS: usize = 600;
/// Number of `R₁` candidates per `R`.
pub const INNER_POINTS: usize = 32;

#[derive(Debug, Clone)]
pub struct RatePipeline {
    pub profile: CurvatureProfile,
    pub tail: TailMode,
    max_radius: f64,
    /// `I(0, k·PANEL)`.
    cumulative: Vec<f64>,
    radii: Vec<f64>,
    /// `min_{R₁} ln Q(R₁, R)` and its minimiser, per radius.
    inner: Vec<(f64, f64)>,
}

/// `α(r)` and the radius realising it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub r: f64,
    /// `None` when `Λ_r` is empty on the scanned grid (`r` below `r₀` resolution).
    pub alpha: Option<f64>,
    pub radius: Option<f64>,
    pub inner_radius: Option<f64>,
}

/// Evidence that `Λ_{r₁} ⊆ Λ_{r₂}` for `r₁ < r₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityWitness {
    pub r_small: f64,
    pub r_large: f64,
    pub radius: f64,
    pub holds: bool,
}

/// Least-squares fit `ln α ≈ c + p·ln|ln r|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// `ln C₇`.
    pub log_constant: f64,
    pub points: usize,
}

/// Numerical check of `I(R, ∞)/√μ(ρ>R) → ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCheck {
    /// `(R, ln(I(R, 2R)/√μ(ρ>R)))`.
    pub samples: Vec<(f64, f64)>,
    pub holds: bool,
}

impl RatePipeline {
    pub fn new(profile: CurvatureProfile, tail: TailMode) -> Result<Self> {
        Self::with_grid(profile, tail, DEFAULT_MAX_RADIUS, DEFAULT_RADIUS_POINTS)
    }

    pub fn with_grid(profile: CurvatureProfile, tail: TailMode, max_radius: f64, points: usize) -> Result<Self> {
        profile.validate()?;
        if let TailMode::Analytic { c1, c2 } = tail {
            if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
                return Err(Error::Argument(format!("tail constants C1={c1}, C2={c2} must be positive")));
            }
        }
        if !(max_radius.is_finite() && max_radius > 0.1) || points < 2 {
            return Err(Error::Argument("radius grid needs max > 0.1 and at least 2 points".into()));
        }
        let panels = (max_radius / PANEL).ceil() as usize;
        let mut cumulative = Vec::with_capacity(panels + 1);
        cumulative.push(0.0);
        for k in 0..panels {
            let a = k as f64 * PANEL;
            let next = cumulative[k] + gauss(&profile, a, a + PANEL);
            cumulative.push(next);
        }
        let lo = 0.05_f64;
        let radii: Vec<f64> = (0..points)
            .map(|i| lo * (max_radius / lo).powf(i as f64 / (points - 1) as f64))
            .collect();
        let mut p = RatePipeline {
            profile,
            tail,
            max_radius,
            cumulative,
            radii,
            inner: Vec::new(),
        };
        p.inner = p.radii.iter().map(|&r| p.inner_minimum(r)).collect();
        Ok(p)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// `I(0, s)`.
    fn cumulative_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.max_radius);
        let k = ((s / PANEL) as usize).min(self.cumulative.len() - 1);
        let a = k as f64 * PANEL;
        self.cumulative[k] + if s > a { gauss(&self.profile, a, s) } else { 0.0 }
    }

    /// `I(a, b) = ∫_a^b ds/√w(s)`.
    pub fn rate_integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0 <= a && a <= b) {
            return Err(Error::Argument(format!("integration bounds ({a}, {b}) must satisfy 0 <= a <= b")));
        }
        if b <= self.max_radius {
            return Ok(self.cumulative_at(b) - self.cumulative_at(a));
        }
        let head = if a < self.max_radius { self.cumulative_at(self.max_radius) - self.cumulative_at(a) } else { 0.0 };
        let start = a.max(self.max_radius);
        let panels = ((b - start) / PANEL).ceil().max(1.0) as usize;
        let h = (b - start) / panels as f64;
        let tail: f64 = (0..panels)
            .map(|k| gauss(&self.profile, start + k as f64 * h, start + (k + 1) as f64 * h))
            .sum();
        Ok(head + tail)
    }

    pub fn theta(&self, r: f64, r1: f64) -> Result<f64> {
        if !(r1 > 0.0) {
            return Err(Error::Argument(format!("R1 = {r1} must be positive")));
        }
        let lt = self.tail.log_tail(r1)?;
        Ok(self.rate_integral(r1, r1.max(r))? * (-0.5 * lt).exp())
    }

    pub fn g_r(&self, r: f64, radius: f64, r1: f64) -> Result<f64> {
        if !(radius > r1 && r1 > 0.0) {
            return Err(Error::Argument(format!("need R > R1 > 0, got R={radius}, R1={r1}")));
        }
        let t = self.theta(r, r1)?;
        let tr = self.theta(radius, r1)?;
        Ok((1.0 - t / tr).max(0.0))
    }

    /// `ln Q(R₁, R)` with `Q = 2μ(ρ>R₁)/I(R₁,R)² + 3√μ(ρ>R₁)`.
    pub fn log_q(&self, r1: f64, radius: f64) -> Result<f64> {
        let lt = self.tail.log_tail(r1)?;
        let i = self.rate_integral(r1, radius)?;
        if !(i > 0.0) {
            return Ok(f64::INFINITY);
        }
        let x = 2.0_f64.ln() + lt - 2.0 * i.ln();
        let y = 3.0_f64.ln() + 0.5 * lt;
        let m = x.max(y);
        Ok(m + ((x - m).exp() + (y - m).exp()).ln())
    }

    /// Candidate inner radii: `R − g` with gaps geometric in `[1e−4·R, (1 − 1e−6)·R]`.
    fn inner_candidates(radius: f64) -> impl Iterator<Item = f64> {
        let (lo, hi) = (1e-4 * radius, (1.0 - 1e-6) * radius);
        (0..INNER_POINTS).map(move |i| radius - lo * (hi / lo).powf(i as f64 / (INNER_POINTS - 1) as f64))
    }

    fn inner_minimum(&self, radius: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, f64::NAN);
        for r1 in Self::inner_candidates(radius) {
            // a zero empirical tail carries no information about the infimum
            if let Ok(q) = self.log_q(r1, radius) {
                if q < best.0 {
                    best = (q, r1);
                }
            }
        }
        best
    }

    /// Whether `R` (a scanned radius) belongs to `Λ_r`, with the witnessing `R₁`.
    pub fn member(&self, radius_index: usize, r: f64) -> Option<f64> {
        let (q, r1) = self.inner[radius_index];
        (r > 0.0 && q <= r.ln()).then_some(r1)
    }

    fn alpha_ln(&self, ln_r: f64) -> AlphaRow {
        let mut best: Option<(f64, f64, f64)> = None;
        for (idx, &radius) in self.radii.iter().enumerate() {
            let (q, r1) = self.inner[idx];
            if q <= ln_r {
                let a = 2.0 * self.profile.weight(radius);
                if best.is_none_or(|b| a < b.0) {
                    best = Some((a, radius, r1));
                }
            }
        }
        AlphaRow {
            r: ln_r.exp(),
            alpha: best.map(|b| b.0),
            radius: best.map(|b| b.1),
            inner_radius: best.map(|b| b.2),
        }
    }

    pub fn alpha(&self, r: f64) -> Result<AlphaRow> {
        if !(r > 0.0) {
            return Err(Error::Argument(format!("r = {r} must be positive")));
        }
        Ok(self.alpha_ln(r.ln()))
    }

    /// `α` on a grid of `ln r` values (allows `r` below the double range).
    pub fn weak_lsi_rate_ln(&self, ln_rs: &[f64]) -> Vec<AlphaRow> {
        ln_rs.iter().map(|&l| self.alpha_ln(l)).collect()
    }

    pub fn weak_lsi_rate(&self, rs: &[f64]) -> Result<Vec<AlphaRow>> {
        rs.iter().map(|&r| self.alpha(r)).collect()
    }

    /// For consecutive `r₁ < r₂`, checks that the minimiser for `r₁` lies in `Λ_{r₂}`.
    pub fn monotonicity_witnesses(&self, rows: &[AlphaRow]) -> Vec<MonotonicityWitness> {
        let mut sorted: Vec<&AlphaRow> = rows.iter().filter(|r| r.radius.is_some()).collect();
        sorted.sort_by(|a, b| a.r.total_cmp(&b.r));
        sorted
            .windows(2)
            .map(|w| {
                let radius = w[0].radius.unwrap_or(f64::NAN);
                let idx = self.radii.iter().position(|&x| x == radius);
                let holds = idx.is_some_and(|i| self.inner[i].0 <= w[1].r.ln());
                MonotonicityWitness {
                    r_small: w[0].r,
                    r_large: w[1].r,
                    radius,
                    holds,
                }
            })
            .collect()
    }

    pub fn divergence_check(&self, threshold: f64) -> Result<DivergenceCheck> {
        let mut samples = Vec::new();
        let top = self.max_radius / 2.0;
        let mut radius = 0.5;
        while radius <= top {
            let lt = match self.tail.log_tail(radius) {
                Ok(v) => v,
                Err(_) => break,
            };
            let i = self.rate_integral(radius, 2.0 * radius)?;
            samples.push((radius, i.ln() - 0.5 * lt));
            radius *= 1.25;
        }
        let holds = samples.len() >= 3 && {
            let tail = &samples[samples.len() - 3..];
            tail.windows(2).all(|w| w[1].1 > w[0].1) && tail[2].1 > threshold.ln()
        };
        Ok(DivergenceCheck { samples, holds })
    }
}

fn gauss(profile: &CurvatureProfile, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let f = |s: f64| 1.0 / profile.weight(s).sqrt();
    GL_X.iter()
        .zip(GL_W)
        .map(|(&x, w)| w * (f(c - h * x) + f(c + h * x)))
        .sum::<f64>()
        * h
}

/// Fits the `|ln r|` exponent of `α` over rows with `r ≤ r_max` (given as `ln r`).
pub fn fit_log_exponent(rows: &[AlphaRow], ln_rs: &[f64], ln_r_max: f64) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .zip(ln_rs)
        .filter(|(row, &l)| l <= ln_r_max && row.alpha.is_some())
        .map(|(row, &l)| ((-l).ln(), row.alpha.unwrap_or(f64::NAN).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Pipeline("fewer than 3 admissible points for the exponent fit".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(ExponentFit {
        exponent,
        log_constant: my - exponent * mx,
        points: pts.len(),
    })
}

/// `β(r) = exp(c₃(1 + r^{−2/(2−2δ₁−δ₂)}))`.
pub fn super_poincare_beta(r: f64, c3: f64, delta1: f64, delta2: f64) -> Result<f64> {
    let gap = 2.0 - 2.0 * delta1 - delta2;
    if !(gap > 0.0) {
        return Err(Error::Argument(format!(
            "2δ1+δ2 = {} must be < 2 for the super-Poincaré rate",
            2.0 * delta1 + delta2
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Argument(format!("r = {r} must be positive")));
    }
    Ok((c3 * (1.0 + r.powf(-2.0 / gap))).exp())
}
