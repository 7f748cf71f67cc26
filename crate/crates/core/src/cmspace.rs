//! Cameron–Martin space on a uniform grid.
//!
//! An element `h` is stored by its derivative, constant on each cell
//! `[s_k, s_{k+1})`, so `⟨h, g⟩_H = Σ_k h'_k·g'_k / N` is exact.
//!
//! The Haar basis is indexed by `m = n(p−1) + j` with `1 ≤ j ≤ n`, where
//! `S_1 ≡ 1` and, for `p = 2^k + i` (`1 ≤ i ≤ 2^k`), `S_p = 2^{k/2}` on the
//! left half and `−2^{k/2}` on the right half of `[(i−1)2^{−k}, i·2^{−k})`.
//! `H_m(t) = ∫₀ᵗ S_p e_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathsim::TimeGrid;

/// Default truncation level of Haar expansions.
pub const DEFAULT_LEVEL: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMVector {
    grid: TimeGrid,
    dim: usize,
    deriv: Vec<f64>,
}

impl CMVector {
    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        CMVector {
            grid,
            dim,
            deriv: vec![0.0; grid.steps() * dim],
        }
    }

    /// `deriv[k·dim + j]` is component `j` of `h'` on cell `k`.
    pub fn from_derivative(grid: TimeGrid, dim: usize, deriv: Vec<f64>) -> Result<Self> {
        if deriv.len() != grid.steps() * dim {
            return Err(Error::Argument(format!(
                "derivative has {} samples, grid and dimension need {}",
                deriv.len(),
                grid.steps() * dim
            )));
        }
        Ok(CMVector { grid, dim, deriv })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.deriv[k * self.dim..(k + 1) * self.dim]
    }

    pub fn derivative_flat(&self) -> &[f64] {
        &self.deriv
    }

    pub(crate) fn derivative_mut(&mut self) -> &mut [f64] {
        &mut self.deriv
    }

    /// `h(s_k)`.
    pub fn value_at(&self, k: usize) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut v = vec![0.0; self.dim];
        for c in 0..k {
            for (j, vj) in v.iter_mut().enumerate() {
                *vj += self.deriv[c * self.dim + j] * dt;
            }
        }
        v
    }

    /// `h(s_k)` for every node, flattened.
    pub fn node_values(&self) -> Vec<f64> {
        let (n, dt) = (self.dim, self.grid.dt());
        let mut out = vec![0.0; (self.grid.steps() + 1) * n];
        for c in 0..self.grid.steps() {
            for j in 0..n {
                out[(c + 1) * n + j] = out[c * n + j] + self.deriv[c * n + j] * dt;
            }
        }
        out
    }

    fn check_same(&self, other: &CMVector) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::Argument("Cameron–Martin vectors live on different grids".into()));
        }
        Ok(())
    }

    pub fn inner(&self, other: &CMVector) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.deriv.iter().zip(&other.deriv).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.dt())
    }

    pub fn norm_sq(&self) -> f64 {
        self.deriv.iter().map(|a| a * a).sum::<f64>() * self.grid.dt()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &CMVector) -> Result<CMVector> {
        self.check_same(other)?;
        let deriv = self.deriv.iter().zip(&other.deriv).map(|(a, b)| a + c * b).collect();
        Ok(CMVector { deriv, ..self.clone() })
    }

    pub fn scaled(&self, c: f64) -> CMVector {
        CMVector {
            deriv: self.deriv.iter().map(|a| c * a).collect(),
            ..self.clone()
        }
    }
}

/// `Ψ_{t,v}(s) = (s∧t)·v`.
pub fn wedge_vector(grid: TimeGrid, t: f64, v: &[f64]) -> Result<CMVector> {
    let kt = grid.index_of(t)?;
    let n = v.len();
    let mut h = CMVector::zeros(grid, n);
    for k in 0..kt {
        h.deriv[k * n..(k + 1) * n].copy_from_slice(v);
    }
    Ok(h)
}

/// Decomposition of a Haar index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaarIndex {
    pub m: usize,
    pub p: usize,
    /// 1-based component.
    pub j: usize,
}

impl HaarIndex {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Argument("Haar indices and dimensions start at 1".into()));
        }
        Ok(HaarIndex {
            m,
            p: (m - 1) / n + 1,
            j: (m - 1) % n + 1,
        })
    }

    /// `(k, i)` with `p = 2^k + i`, or `None` for `p = 1`.
    pub fn level(&self) -> Option<(u32, usize)> {
        if self.p == 1 {
            return None;
        }
        let k = (self.p - 1).ilog2();
        Some((k, self.p - (1usize << k)))
    }

    /// Cell range `[a, mid, b)` of the support on an `N`-step grid (for `p ≥ 2`).
    fn cells(&self, steps: usize) -> Option<(usize, usize, usize, f64)> {
        let (k, i) = self.level()?;
        let width = steps >> k;
        let a = (i - 1) * width;
        Some((a, a + width / 2, a + width, (2.0_f64).powf(k as f64 / 2.0)))
    }
}

/// Number of Haar modes through level `L`: `n·2^{L+1}`.
pub fn mode_count(n: usize, level: u32) -> usize {
    n << (level + 1)
}

/// Lowest level needed to represent index `m`.
pub fn level_of(m: usize, n: usize) -> Result<u32> {
    Ok(HaarIndex::new(m, n)?.level().map_or(0, |(k, _)| k))
}

/// The basis element `H_m`.
pub fn haar_vector(grid: TimeGrid, n: usize, m: usize) -> Result<CMVector> {
    let idx = HaarIndex::new(m, n)?;
    grid.check_haar_level(level_of(m, n)?)?;
    let mut h = CMVector::zeros(grid, n);
    let j = idx.j - 1;
    match idx.cells(grid.steps()) {
        None => (0..grid.steps()).for_each(|k| h.deriv[k * n + j] = 1.0),
        Some((a, mid, b, amp)) => {
            (a..mid).for_each(|k| h.deriv[k * n + j] = amp);
            (mid..b).for_each(|k| h.deriv[k * n + j] = -amp);
        }
    }
    Ok(h)
}

/// Coefficients `c_m = ⟨h, H_m⟩` for `m = 1..=n·2^{L+1}`.
pub fn project_haar(h: &CMVector, level: u32) -> Result<Vec<f64>> {
    h.grid.check_haar_level(level)?;
    let n = h.dim;
    let vals = h.node_values();
    let at = |k: usize, j: usize| vals[k * n + j];
    let steps = h.grid.steps();
    let count = mode_count(n, level);
    let mut out = Vec::with_capacity(count);
    for m in 1..=count {
        let idx = HaarIndex::new(m, n)?;
        let j = idx.j - 1;
        out.push(match idx.cells(steps) {
            None => at(steps, j),
            Some((a, mid, b, amp)) => amp * (2.0 * at(mid, j) - at(a, j) - at(b, j)),
        });
    }
    Ok(out)
}

/// `Σ_m c_m H_m` on `grid`.
pub fn synthesize_haar(grid: TimeGrid, n: usize, coeffs: &[f64]) -> Result<CMVector> {
    if coeffs.is_empty() {
        return Ok(CMVector::zeros(grid, n));
    }
    grid.check_haar_level(level_of(coeffs.len(), n)?)?;
    let mut h = CMVector::zeros(grid, n);
    for (m0, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let idx = HaarIndex::new(m0 + 1, n)?;
        let j = idx.j - 1;
        match idx.cells(grid.steps()) {
            None => (0..grid.steps()).for_each(|k| h.deriv[k * n + j] += c),
            Some((a, mid, b, amp)) => {
                (a..mid).for_each(|k| h.deriv[k * n + j] += c * amp);
                (mid..b).for_each(|k| h.deriv[k * n + j] -= c * amp);
            }
        }
    }
    Ok(h)
}
