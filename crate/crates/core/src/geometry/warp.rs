//! Warping function of the rotationally symmetric surface `dr² + ψ(r)² dθ²`.
//!
//! `ψ` solves `ψ'' = (a + b·ln(1+r))·ψ` with `ψ(0) = 0`, `ψ'(0) = 1`, so the
//! Gaussian curvature is `−ψ''/ψ = −(a + b·ln(1+r))`. The surface is handled
//! in geodesic normal coordinates at the pole: a chart point `x ∈ ℝ²` sits at
//! radius `|x|` and the metric is `e_r e_rᵀ + (ψ/r)² e_θ e_θᵀ`, which is smooth
//! through the pole.

use crate::error::{Error, Result};

/// Radial step of the precomputed table.
pub(crate) const TABLE_STEP: f64 = 1e-3;

/// Below this radius closed-form Taylor expansions replace table lookups.
const SERIES_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone)]
pub(crate) struct WarpTable {
    a: f64,
    b: f64,
    extent: f64,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

impl WarpTable {
    pub(crate) fn new(a: f64, b: f64, extent: f64) -> Self {
        let nodes = (extent / TABLE_STEP).ceil() as usize + 1;
        let mut psi = Vec::with_capacity(nodes);
        let mut dpsi = Vec::with_capacity(nodes);
        let (mut y, mut dy) = (0.0_f64, 1.0_f64);
        psi.push(y);
        dpsi.push(dy);
        let h = TABLE_STEP;
        let k = |r: f64| a + b * (1.0 + r).ln();
        for i in 0..nodes - 1 {
            let r = i as f64 * h;
            // RK4 on (ψ, ψ')' = (ψ', k(r)ψ)
            let (k1y, k1d) = (dy, k(r) * y);
            let (k2y, k2d) = (dy + 0.5 * h * k1d, k(r + 0.5 * h) * (y + 0.5 * h * k1y));
            let (k3y, k3d) = (dy + 0.5 * h * k2d, k(r + 0.5 * h) * (y + 0.5 * h * k2y));
            let (k4y, k4d) = (dy + h * k3d, k(r + h) * (y + h * k3y));
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            psi.push(y);
            dpsi.push(dy);
        }
        WarpTable {
            a,
            b,
            extent: (nodes - 1) as f64 * h,
            psi,
            dpsi,
        }
    }

    pub(crate) fn extent(&self) -> f64 {
        self.extent
    }

    pub(crate) fn curvature_rate(&self, r: f64) -> f64 {
        self.a + self.b * (1.0 + r).ln()
    }

    /// `(ψ(r), ψ'(r))` by cubic Hermite interpolation between table nodes.
    pub(crate) fn eval(&self, r: f64) -> Result<(f64, f64)> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Domain(format!("radius {r} is not a valid radial coordinate")));
        }
        if r > self.extent {
            return Err(Error::Domain(format!(
                "radius {r} exceeds the warp table extent {}",
                self.extent
            )));
        }
        let h = TABLE_STEP;
        let i = ((r / h) as usize).min(self.psi.len() - 2);
        let t = (r - i as f64 * h) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let (p0, p1) = (self.psi[i], self.psi[i + 1]);
        let (d0, d1) = (self.dpsi[i], self.dpsi[i + 1]);
        let r0 = i as f64 * h;
        let dd0 = self.curvature_rate(r0) * p0;
        let dd1 = self.curvature_rate(r0 + h) * p1;
        let psi = h00 * p0 + h10 * h * d0 + h01 * p1 + h11 * h * d1;
        let dpsi = h00 * d0 + h10 * h * dd0 + h01 * d1 + h11 * h * dd1;
        Ok((psi, dpsi))
    }

    /// `(ψ(r)/r)²`, the tangential metric factor in normal coordinates.
    pub(crate) fn tangential_factor(&self, r: f64) -> Result<f64> {
        if r < SERIES_RADIUS {
            let q = 1.0 + self.a * r * r / 6.0 + self.b * r * r * r / 12.0;
            return Ok(q * q);
        }
        let (psi, _) = self.eval(r)?;
        let q = psi / r;
        Ok(q * q)
    }

    /// Connection coefficients `A = (ψψ' − r)/r²` and `B = (ψ − rψ')/(rψ)`.
    ///
    /// In the basis `(e_r, e_θ)` the geodesic acceleration is
    /// `A·v_θ²·e_r + 2B·v_r·v_θ·e_θ`.
    pub(crate) fn connection(&self, r: f64) -> Result<(f64, f64)> {
        if r < SERIES_RADIUS {
            let (a, b) = (self.a, self.b);
            let big_a = 2.0 * a / 3.0 * r + 5.0 * b / 12.0 * r * r;
            let big_b = -a / 3.0 * r - b / 4.0 * r * r;
            return Ok((big_a, big_b));
        }
        let (psi, dpsi) = self.eval(r)?;
        Ok(((psi * dpsi - r) / (r * r), (psi - r * dpsi) / (r * psi)))
    }
}
