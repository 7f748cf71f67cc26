//! Horizontal Brownian paths on a uniform grid of `[0, 1]` and the Ricci flow along them.
//!
//! Paths are produced by the geodesic random walk
//! `x_{k+1} = exp_{x_k}(U_k ΔW_k)`, with `U_{k+1}` the parallel transport of
//! `U_k` along the step, followed by a reprojection onto the manifold and the
//! orthonormal frame bundle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frame, ManifoldModel};
use crate::mc::PathStream;

/// Default number of grid steps.
pub const DEFAULT_STEPS: usize = 512;

/// Uniform grid `s_k = k/N` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    steps: usize,
}

impl TimeGrid {
    pub fn new(steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Argument(format!("time grid needs at least 2 steps, got {steps}")));
        }
        Ok(TimeGrid { steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 / self.steps as f64
    }

    /// Index of the grid node equal to `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let scaled = t * self.steps as f64;
        let k = scaled.round();
        if !(0.0..=self.steps as f64).contains(&k) || (scaled - k).abs() > 1e-9 {
            return Err(Error::Argument(format!("time {t} is not a node of the {}-step grid", self.steps)));
        }
        Ok(k as usize)
    }

    /// Checks that dyadic intervals of length `2^{-(level+1)}` are unions of cells.
    pub fn check_haar_level(&self, level: u32) -> Result<()> {
        let need = 1usize
            .checked_shl(level + 1)
            .ok_or_else(|| Error::Argument(format!("Haar level {level} is too large")))?;
        if !self.steps.is_multiple_of(need) {
            return Err(Error::Argument(format!(
                "grid with {} steps cannot resolve Haar level {level} (needs a multiple of {need})",
                self.steps
            )));
        }
        Ok(())
    }
}

/// A sampled horizontal path: points, orthonormal frames and Brownian increments.
///
/// Storage is flat. Node `k` occupies `points[k·a..(k+1)·a]` and
/// `frames[k·a·n..(k+1)·a·n]` (column-major, `a` = ambient dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalPath {
    grid: TimeGrid,
    dim: usize,
    ambient: usize,
    points: Vec<f64>,
    frames: Vec<f64>,
    increments: Vec<f64>,
}

impl HorizontalPath {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.ambient..(k + 1) * self.ambient]
    }

    pub fn frame_flat(&self, k: usize) -> &[f64] {
        let size = self.ambient * self.dim;
        &self.frames[k * size..(k + 1) * size]
    }

    pub fn frame(&self, k: usize) -> Frame {
        Frame::from_flat(self.ambient, self.dim, self.frame_flat(k))
    }

    /// `ΔW_k = W_{s_{k+1}} − W_{s_k}`.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// Builds a path from explicit nodes (used for deterministic test paths).
    pub fn from_parts(
        model: &ManifoldModel,
        grid: TimeGrid,
        points: Vec<f64>,
        frames: Vec<f64>,
        increments: Vec<f64>,
    ) -> Result<Self> {
        let (a, n, nodes) = (model.ambient_dim(), model.dim(), grid.steps + 1);
        if points.len() != nodes * a || frames.len() != nodes * a * n || increments.len() != grid.steps * n {
            return Err(Error::Argument("path buffers do not match the grid and manifold".into()));
        }
        Ok(HorizontalPath {
            grid,
            dim: n,
            ambient: a,
            points,
            frames,
            increments,
        })
    }

    /// The path that stays at the origin with the canonical frame.
    pub fn constant(model: &ManifoldModel, grid: TimeGrid) -> Self {
        let nodes = grid.steps + 1;
        HorizontalPath {
            grid,
            dim: model.dim(),
            ambient: model.ambient_dim(),
            points: model.origin().repeat(nodes),
            frames: model.origin_frame_flat().repeat(nodes),
            increments: vec![0.0; grid.steps * model.dim()],
        }
    }

    /// Keeps every `factor`-th node, summing the increments in between.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.grid.steps.is_multiple_of(factor) {
            return Err(Error::Argument(format!(
                "cannot subsample a {}-step path by {factor}",
                self.grid.steps
            )));
        }
        let grid = TimeGrid::new(self.grid.steps / factor)?;
        let size = self.ambient * self.dim;
        let mut points = Vec::with_capacity((grid.steps + 1) * self.ambient);
        let mut frames = Vec::with_capacity((grid.steps + 1) * size);
        let mut increments = vec![0.0; grid.steps * self.dim];
        for k in 0..=grid.steps {
            points.extend_from_slice(self.point(k * factor));
            frames.extend_from_slice(self.frame_flat(k * factor));
        }
        for k in 0..self.grid.steps {
            let c = k / factor;
            for j in 0..self.dim {
                increments[c * self.dim + j] += self.increments[k * self.dim + j];
            }
        }
        Ok(HorizontalPath {
            grid,
            dim: self.dim,
            ambient: self.ambient,
            points,
            frames,
            increments,
        })
    }

    /// Serializable record of the path.
    pub fn record(&self, index: u64) -> PathRecord {
        let nodes = self.grid.steps + 1;
        PathRecord {
            index,
            times: (0..nodes).map(|k| self.grid.node(k)).collect(),
            points: (0..nodes).map(|k| self.point(k).to_vec()).collect(),
            frames: (0..nodes)
                .map(|k| self.frame_flat(k).chunks(self.ambient).map(<[f64]>::to_vec).collect())
                .collect(),
        }
    }
}

/// One line of a path dump.
///
/// Field order: `index`, `times[k]`, `points[k][i]` (representation
/// coordinates), `frames[k][j][i]` (component `i` of frame column `j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: u64,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub frames: Vec<Vec<Vec<f64>>>,
}

/// Samples path number `index` of the experiment keyed by `seed`.
pub fn roll_path(model: &ManifoldModel, grid: TimeGrid, seed: u64, index: u64) -> Result<HorizontalPath> {
    let mut stream = PathStream::new(seed, index, model.dim());
    roll_path_with(model, grid, |k, out| stream.normals(k as u64, grid.dt().sqrt(), out))
        .map_err(|e| e.at_path(index))
}

/// Samples a path from caller-supplied increments `draw(k, ΔW_k)`.
pub fn roll_path_with<D>(model: &ManifoldModel, grid: TimeGrid, mut draw: D) -> Result<HorizontalPath>
where
    D: FnMut(usize, &mut [f64]),
{
    let (a, n, steps) = (model.ambient_dim(), model.dim(), grid.steps);
    let size = a * n;
    let mut points = Vec::with_capacity((steps + 1) * a);
    let mut frames = Vec::with_capacity((steps + 1) * size);
    let mut increments = vec![0.0; steps * n];
    let mut x = model.origin();
    let mut u = model.origin_frame_flat();
    let mut v = vec![0.0; a];
    points.extend_from_slice(&x);
    frames.extend_from_slice(&u);
    for k in 0..steps {
        let dw = &mut increments[k * n..(k + 1) * n];
        draw(k, dw);
        v.iter_mut().for_each(|c| *c = 0.0);
        for (j, &w) in dw.iter().enumerate() {
            for i in 0..a {
                v[i] += u[j * a + i] * w;
            }
        }
        model.advance(&mut x, &mut u, &v)?;
        model.reproject(&mut x, &mut u)?;
        points.extend_from_slice(&x);
        frames.extend_from_slice(&u);
    }
    Ok(HorizontalPath {
        grid,
        dim: n,
        ambient: a,
        points,
        frames,
        increments,
    })
}

/// `ρ(γ) = max_k d(o, x_k)`.
pub fn rho(model: &ManifoldModel, path: &HorizontalPath) -> f64 {
    (0..=path.grid.steps)
        .map(|k| model.dist_unchecked(path.point(k)))
        .fold(0.0, f64::max)
}

/// `ρ^m(γ) = max_i d(o, γ(t_i))` over the listed grid times.
pub fn rho_m(model: &ManifoldModel, path: &HorizontalPath, times: &[f64]) -> Result<f64> {
    Ok(rho_m_argmax(model, path, times)?.radius)
}

/// Maximiser of `d(o, γ(t_i))` over the listed times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialArgmax {
    pub radius: f64,
    /// Position in the `times` list.
    pub slot: usize,
    /// Grid node of that time.
    pub node: usize,
    /// Another time attained the same radius; the smallest slot was kept.
    pub tie: bool,
}

pub fn rho_m_argmax(model: &ManifoldModel, path: &HorizontalPath, times: &[f64]) -> Result<RadialArgmax> {
    if times.is_empty() {
        return Err(Error::Argument("rho_m needs at least one time".into()));
    }
    let mut best = RadialArgmax {
        radius: f64::NEG_INFINITY,
        slot: 0,
        node: 0,
        tie: false,
    };
    for (slot, &t) in times.iter().enumerate() {
        let node = path.grid.index_of(t)?;
        let d = model.dist_unchecked(path.point(node));
        if d > best.radius {
            best = RadialArgmax {
                radius: d,
                slot,
                node,
                tie: false,
            };
        } else if d == best.radius {
            best.tie = true;
        }
    }
    Ok(best)
}

/// `(K(γ), K₁(γ)) = (max_k |κ(x_k)|, min_k κ(x_k))`.
pub fn path_ricci_extremes(model: &ManifoldModel, path: &HorizontalPath) -> (f64, f64) {
    let mut k = 0.0_f64;
    let mut k1 = f64::INFINITY;
    for i in 0..=path.grid.steps {
        let kappa = model.ricci_factor(path.point(i));
        k = k.max(kappa.abs());
        k1 = k1.min(kappa);
    }
    (k, k1)
}

/// `Φ_k = Φ_{0,s_k}` solving `dΦ/ds = −½ Ric^♯ Φ`, together with `Ric^♯` at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciFlow {
    dim: usize,
    phi: Vec<f64>,
    ric: Vec<f64>,
}

impl RicciFlow {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.phi.len() / (self.dim * self.dim)
    }

    pub fn phi_flat(&self, k: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.phi[k * s..(k + 1) * s]
    }

    pub fn ric_flat(&self, k: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.ric[k * s..(k + 1) * s]
    }

    pub fn phi(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim, self.dim, self.phi_flat(k))
    }

    pub fn ric(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim, self.dim, self.ric_flat(k))
    }
}

/// Integrates the Ricci flow along `path` with the RK2 midpoint rule,
/// `Ric^♯` being linearly interpolated between nodes.
pub fn phi_flow(model: &ManifoldModel, path: &HorizontalPath) -> Result<RicciFlow> {
    let n = path.dim;
    let s = n * n;
    let nodes = path.grid.steps + 1;
    let h = path.grid.dt();
    let mut ric = vec![0.0; nodes * s];
    for k in 0..nodes {
        model.ricci_endomorphism_into(path.point(k), path.frame_flat(k), &mut ric[k * s..(k + 1) * s])?;
    }
    let mut phi = vec![0.0; nodes * s];
    for i in 0..n {
        phi[i * n + i] = 1.0;
    }
    let mut mid = vec![0.0; s];
    let mut rmid = vec![0.0; s];
    for k in 0..nodes - 1 {
        let (done, rest) = phi.split_at_mut((k + 1) * s);
        let cur = &done[k * s..];
        let next = &mut rest[..s];
        let r0 = &ric[k * s..(k + 1) * s];
        let r1 = &ric[(k + 1) * s..(k + 2) * s];
        // Φ_mid = Φ − (h/4) R_k Φ
        matmul(n, r0, cur, &mut mid);
        for i in 0..s {
            mid[i] = cur[i] - 0.25 * h * mid[i];
            rmid[i] = 0.5 * (r0[i] + r1[i]);
        }
        // Φ_{k+1} = Φ − (h/2) R_mid Φ_mid
        matmul(n, &rmid, &mid, next);
        for i in 0..s {
            next[i] = cur[i] - 0.5 * h * next[i];
        }
    }
    Ok(RicciFlow { dim: n, phi, ric })
}

/// `Φ_{r,s} = Φ_s Φ_r⁻¹` for node indices `r ≤ s`.
pub fn phi_between(flow: &RicciFlow, r: usize, s: usize) -> Result<DMatrix<f64>> {
    if r > s || s >= flow.nodes() {
        return Err(Error::Argument(format!("invalid node pair ({r}, {s})")));
    }
    let inv = flow
        .phi(r)
        .try_inverse()
        .ok_or_else(|| Error::Numeric(format!("Φ at node {r} is singular")))?;
    Ok(flow.phi(s) * inv)
}

/// Column-major `out = a·b` for `n × n` matrices.
pub(crate) fn matmul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += a[l * n + i] * b[j * n + l];
            }
            out[j * n + i] = acc;
        }
    }
}
