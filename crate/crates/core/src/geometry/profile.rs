use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial envelope of the Ricci curvature evaluated in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExactProfile {
    /// `Ric = κ·g` with constant `κ`.
    Constant { kappa: f64 },
    /// `Ric = −(a + b·ln(1+r))·g`.
    LogGrowth { a: f64, b: f64 },
}

/// Growth envelope `K̃(s) ≤ c1(1+s^δ1)`, `K̃₁(s) ≥ −c2 − δ2·ln(1+s)`.
///
/// When `exact` is set, [`CurvatureProfile::sup_norm`] and
/// [`CurvatureProfile::inf_eigen`] evaluate the true radial envelopes;
/// otherwise the parametric bounds are used as if they were attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub c1: f64,
    pub c2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub exact: Option<ExactProfile>,
}

impl CurvatureProfile {
    pub fn parametric(c1: f64, c2: f64, delta1: f64, delta2: f64) -> Result<Self> {
        let p = CurvatureProfile {
            c1,
            c2,
            delta1,
            delta2,
            exact: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!("profile field {name}={v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// `K̃(s)`: sup of the Ricci norm over the ball of radius `s`.
    pub fn sup_norm(&self, s: f64) -> f64 {
        match self.exact {
            Some(ExactProfile::Constant { kappa }) => kappa.abs(),
            Some(ExactProfile::LogGrowth { a, b }) => a + b * (1.0 + s).ln(),
            None => self.c1 * (1.0 + s.powf(self.delta1)),
        }
    }

    /// `K̃₁(s)`: inf of the smallest Ricci eigenvalue over the ball of radius `s`.
    pub fn inf_eigen(&self, s: f64) -> f64 {
        match self.exact {
            Some(ExactProfile::Constant { kappa }) => kappa,
            Some(ExactProfile::LogGrowth { a, b }) => -(a + b * (1.0 + s).ln()),
            None => -self.c2 - self.delta2 * (1.0 + s).ln(),
        }
    }

    /// `4 + K̃(s)²·e^{−K̃₁(s)}`, the weight appearing in the radial rate integrals.
    pub fn weight(&self, s: f64) -> f64 {
        let k = self.sup_norm(s);
        4.0 + k * k * (-self.inf_eigen(s)).exp()
    }

    /// `2δ1 + δ2`, the exponent controlling the Poincaré regime.
    pub fn growth_exponent(&self) -> f64 {
        2.0 * self.delta1 + self.delta2
    }

    /// Checks that the parametric envelope dominates the exact one on `grid`.
    pub fn envelope_holds_on(&self, grid: &[f64]) -> bool {
        let param = CurvatureProfile { exact: None, ..*self };
        grid.iter().all(|&s| {
            let upper = self.sup_norm(s) <= param.sup_norm(s) * (1.0 + 1e-12) + 1e-12;
            let lower = self.inf_eigen(s) >= param.inf_eigen(s) - 1e-12 * (1.0 + param.inf_eigen(s).abs());
            upper && lower
        })
    }
}

/// Smallest `c1` with `a + b·ln(1+s) ≤ c1·(1 + s^δ1)` for all `s ≥ 0`.
pub(crate) fn log_growth_c1(a: f64, b: f64, delta1: f64) -> f64 {
    let ratio = |u: f64| {
        // s = e^u; ln(1+s) evaluated stably for large u
        let s = u.exp();
        let log1p = if u > 30.0 { u + (-u).exp() } else { s.ln_1p() };
        (a + b * log1p) / (1.0 + (delta1 * u).exp())
    };
    let (lo, hi, steps) = (-30.0_f64, 700.0_f64, 100_000);
    let du = (hi - lo) / steps as f64;
    let mut best_u = lo;
    let mut best = ratio(lo);
    for i in 0..=steps {
        let u = lo + i as f64 * du;
        let v = ratio(u);
        if v > best {
            best = v;
            best_u = u;
        }
    }
    // golden-section refinement around the coarse maximiser
    let (mut l, mut r) = (best_u - du, best_u + du);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = r - g * (r - l);
        let m2 = l + g * (r - l);
        if ratio(m1) < ratio(m2) {
            l = m1;
        } else {
            r = m2;
        }
    }
    best = best.max(ratio(0.5 * (l + r)));
    // as s → 0⁺ the ratio tends to a when δ1 > 0
    best.max(a) * (1.0 + 1e-9)
}
