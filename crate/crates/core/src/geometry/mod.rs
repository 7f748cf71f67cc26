//! Riemannian geometry kernels for the built-in manifold instances.
//!
//! Every instance is Einstein (`Ric = κ·g`), so the Ricci endomorphism in any
//! orthonormal frame is the scalar matrix `κ·I`:
//!
//! | instance        | representation                       | `κ(x)`               |
//! |-----------------|--------------------------------------|----------------------|
//! | `Euclidean(n)`  | ℝⁿ                                   | `0`                  |
//! | `Sphere2`       | unit sphere in ℝ³, pole `(0,0,1)`    | `1`                  |
//! | `Hyperbolic2`   | hyperboloid in ℝ^{1,2}, pole `(1,0,0)` | `−1`               |
//! | `LogSurface`    | normal coordinates at the pole, ℝ²   | `−(a + b·ln(1+r))`   |
//!
//! Points are flat `&[f64]` slices in the representation space (the
//! "ambient" coordinates); tangent vectors use the same coordinates. Frames
//! store `dim` columns of `ambient_dim` entries each.

mod profile;
mod warp;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use profile::{CurvatureProfile, ExactProfile};

use crate::error::{Error, Result};
use warp::WarpTable;

/// Default guard on the length of a single exponential-map step.
pub const DEFAULT_STEP_GUARD: f64 = 0.5;
/// Default maximal RK4 sub-step length for the warped surface.
pub const DEFAULT_SUBSTEP: f64 = 0.008;
/// Default radial extent of the warp table.
pub const DEFAULT_WARP_EXTENT: f64 = 16.0;

const SPHERE_TOL: f64 = 1e-6;

/// Which built-in manifold a [`ManifoldModel`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ManifoldKind {
    Euclidean(usize),
    Sphere2,
    Hyperbolic2,
    LogSurface { a: f64, b: f64 },
}

impl std::fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ManifoldKind::Euclidean(n) => write!(f, "euclidean:{n}"),
            ManifoldKind::Sphere2 => write!(f, "sphere2"),
            ManifoldKind::Hyperbolic2 => write!(f, "hyperbolic2"),
            ManifoldKind::LogSurface { a, b } => write!(f, "logsurface:{a},{b}"),
        }
    }
}

impl std::str::FromStr for ManifoldKind {
    type Err = Error;

    /// Parses the [`Display`](std::fmt::Display) form, e.g. `euclidean:3` or `logsurface:1,0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let bad = || Error::Argument(format!("cannot parse manifold {s:?}; expected euclidean:N, sphere2, hyperbolic2 or logsurface:A,B"));
        match (name.to_ascii_lowercase().as_str(), args) {
            ("euclidean", n) => n.trim().parse().map(ManifoldKind::Euclidean).map_err(|_| bad()),
            ("sphere2", "") => Ok(ManifoldKind::Sphere2),
            ("hyperbolic2", "") => Ok(ManifoldKind::Hyperbolic2),
            ("logsurface", ab) => {
                let (a, b) = ab.split_once(',').ok_or_else(bad)?;
                let a = a.trim().parse().map_err(|_| bad())?;
                let b = b.trim().parse().map_err(|_| bad())?;
                Ok(ManifoldKind::LogSurface { a, b })
            }
            _ => Err(bad()),
        }
    }
}

/// Immutable geometry descriptor. Cheap to clone and safe to share between threads.
#[derive(Debug, Clone)]
pub struct ManifoldModel {
    kind: ManifoldKind,
    step_guard: f64,
    substep: f64,
    warp: Option<Arc<WarpTable>>,
}

/// An orthonormal frame at a point: `dim` tangent vectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    basis: DMatrix<f64>,
}

impl Frame {
    pub fn new(basis: DMatrix<f64>) -> Self {
        Frame { basis }
    }

    pub(crate) fn from_flat(ambient: usize, cols: usize, data: &[f64]) -> Self {
        Frame {
            basis: DMatrix::from_column_slice(ambient, cols, data),
        }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.basis.column(j).iter().copied().collect()
    }

    /// Applies the frame to frame coordinates: `U·a`.
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.nrows()];
        for (j, &aj) in a.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.basis[(i, j)] * aj;
            }
        }
        out
    }

    /// `max |UᵀG(x)U − I|`.
    pub fn orthonormality_defect(&self, model: &ManifoldModel, x: &[f64]) -> Result<f64> {
        let gram = self.basis.transpose() * model.metric(x)? * &self.basis;
        let n = gram.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        Ok(worst)
    }
}

impl ManifoldModel {
    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("Euclidean dimension must be positive".into()));
        }
        Ok(Self::base(ManifoldKind::Euclidean(n)))
    }

    pub fn sphere2() -> Self {
        Self::base(ManifoldKind::Sphere2)
    }

    pub fn hyperbolic2() -> Self {
        Self::base(ManifoldKind::Hyperbolic2)
    }

    pub fn log_surface(a: f64, b: f64) -> Result<Self> {
        Self::log_surface_with_extent(a, b, DEFAULT_WARP_EXTENT)
    }

    pub fn log_surface_with_extent(a: f64, b: f64, extent: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err(Error::Argument(format!("log surface needs a, b >= 0, got a={a}, b={b}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Argument(format!("warp extent {extent} must be positive")));
        }
        let mut m = Self::base(ManifoldKind::LogSurface { a, b });
        m.warp = Some(Arc::new(WarpTable::new(a, b, extent)));
        Ok(m)
    }

    pub fn from_kind(kind: ManifoldKind) -> Result<Self> {
        match kind {
            ManifoldKind::Euclidean(n) => Self::euclidean(n),
            ManifoldKind::Sphere2 => Ok(Self::sphere2()),
            ManifoldKind::Hyperbolic2 => Ok(Self::hyperbolic2()),
            ManifoldKind::LogSurface { a, b } => Self::log_surface(a, b),
        }
    }

    fn base(kind: ManifoldKind) -> Self {
        ManifoldModel {
            kind,
            step_guard: DEFAULT_STEP_GUARD,
            substep: DEFAULT_SUBSTEP,
            warp: None,
        }
    }

    pub fn with_step_guard(mut self, guard: f64) -> Self {
        self.step_guard = guard;
        self
    }

    pub fn with_substep(mut self, substep: f64) -> Self {
        self.substep = substep;
        self
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn step_guard(&self) -> f64 {
        self.step_guard
    }

    /// Intrinsic dimension `n`.
    pub fn dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean(n) => n,
            _ => 2,
        }
    }

    /// Length of a point or tangent-vector slice.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean(n) => n,
            ManifoldKind::Sphere2 | ManifoldKind::Hyperbolic2 => 3,
            ManifoldKind::LogSurface { .. } => 2,
        }
    }

    /// The base point `o`.
    pub fn origin(&self) -> Vec<f64> {
        match self.kind {
            ManifoldKind::Euclidean(n) => vec![0.0; n],
            ManifoldKind::Sphere2 => vec![0.0, 0.0, 1.0],
            ManifoldKind::Hyperbolic2 => vec![1.0, 0.0, 0.0],
            ManifoldKind::LogSurface { .. } => vec![0.0, 0.0],
        }
    }

    /// The canonical frame `u_o` at the base point.
    pub fn origin_frame(&self) -> Frame {
        let amb = self.ambient_dim();
        Frame::from_flat(amb, self.dim(), &self.origin_frame_flat())
    }

    pub(crate) fn origin_frame_flat(&self) -> Vec<f64> {
        match self.kind {
            ManifoldKind::Euclidean(n) => {
                let mut f = vec![0.0; n * n];
                for i in 0..n {
                    f[i * n + i] = 1.0;
                }
                f
            }
            ManifoldKind::Sphere2 => vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            ManifoldKind::Hyperbolic2 => vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ManifoldKind::LogSurface { .. } => vec![1.0, 0.0, 0.0, 1.0],
        }
    }

    fn warp(&self) -> &WarpTable {
        self.warp.as_deref().expect("log surface carries a warp table")
    }

    fn check_len(&self, what: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(Error::Argument(format!(
                "{what} has {} coordinates, {} expects {}",
                v.len(),
                self.kind,
                self.ambient_dim()
            )));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("{what} has non-finite coordinates")));
        }
        Ok(())
    }

    /// Verifies that `x` lies in the chart domain.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.check_len("point", x)?;
        match self.kind {
            ManifoldKind::Euclidean(_) => Ok(()),
            ManifoldKind::Sphere2 => {
                let n = dot(x, x).sqrt();
                if (n - 1.0).abs() > SPHERE_TOL {
                    return Err(Error::Domain(format!("point has norm {n}, not on the unit sphere")));
                }
                Ok(())
            }
            ManifoldKind::Hyperbolic2 => {
                let q = minkowski(x, x);
                if (q + 1.0).abs() > SPHERE_TOL * (1.0 + x[0] * x[0]) || x[0] <= 0.0 {
                    return Err(Error::Domain("point is not on the upper hyperboloid sheet".into()));
                }
                Ok(())
            }
            ManifoldKind::LogSurface { .. } => {
                let r = dot(x, x).sqrt();
                if r > self.warp().extent() {
                    return Err(Error::Domain(format!(
                        "radius {r} exceeds the warp table extent {}",
                        self.warp().extent()
                    )));
                }
                Ok(())
            }
        }
    }

    fn check_tangent(&self, x: &[f64], v: &[f64]) -> Result<()> {
        self.check_len("tangent vector", v)?;
        let scale = 1.0 + dot(v, v).sqrt();
        let off = match self.kind {
            ManifoldKind::Sphere2 => dot(x, v),
            ManifoldKind::Hyperbolic2 => minkowski(x, v) / x[0],
            _ => 0.0,
        };
        if off.abs() > SPHERE_TOL * scale {
            return Err(Error::Domain(format!("vector is not tangent at the point (normal part {off})")));
        }
        Ok(())
    }

    /// Riemannian metric at `x`, as an `ambient × ambient` matrix acting on tangent vectors.
    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let amb = self.ambient_dim();
        Ok(match self.kind {
            ManifoldKind::Euclidean(_) | ManifoldKind::Sphere2 => DMatrix::identity(amb, amb),
            ManifoldKind::Hyperbolic2 => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0])),
            ManifoldKind::LogSurface { .. } => {
                let r = dot(x, x).sqrt();
                let phi = self.warp().tangential_factor(r)?;
                let mut g = DMatrix::identity(2, 2) * phi;
                if r > 0.0 {
                    let e = [x[0] / r, x[1] / r];
                    for i in 0..2 {
                        for j in 0..2 {
                            g[(i, j)] += (1.0 - phi) * e[i] * e[j];
                        }
                    }
                }
                g
            }
        })
    }

    /// Metric inner product `⟨u, v⟩_x` of two tangent vectors at `x`.
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        match self.kind {
            ManifoldKind::LogSurface { .. } => {
                let ctx = self.surface_metric(x)?;
                Ok(ctx.inner(u, v))
            }
            _ => Ok(self.flat_inner(u, v)),
        }
    }

    fn flat_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Hyperbolic2 => minkowski(u, v),
            _ => dot(u, v),
        }
    }

    fn surface_metric(&self, x: &[f64]) -> Result<SurfaceMetric> {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let phi = self.warp().tangential_factor(r)?;
        let er = if r > 0.0 { [x[0] / r, x[1] / r] } else { [1.0, 0.0] };
        Ok(SurfaceMetric { phi, er })
    }

    /// Scalar Ricci factor `κ(x)` with `Ric = κ·g`.
    pub fn ricci_factor(&self, x: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean(_) => 0.0,
            ManifoldKind::Sphere2 => 1.0,
            ManifoldKind::Hyperbolic2 => -1.0,
            ManifoldKind::LogSurface { a, b } => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                -(a + b * r.ln_1p())
            }
        }
    }

    /// `Ric^♯` in the frame `U`: the matrix `⟨Ric(U a), U b⟩`.
    pub fn ricci_endomorphism(&self, x: &[f64], frame: &Frame) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = self.dim();
        if frame.basis.nrows() != self.ambient_dim() || frame.basis.ncols() != n {
            return Err(Error::Argument("frame shape does not match the manifold".into()));
        }
        let mut out = vec![0.0; n * n];
        self.ricci_endomorphism_into(x, frame.basis.as_slice(), &mut out)?;
        Ok(DMatrix::from_column_slice(n, n, &out))
    }

    /// Column-major `Ric^♯` for a flat frame, without allocation.
    pub(crate) fn ricci_endomorphism_into(&self, x: &[f64], frame: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let amb = self.ambient_dim();
        let kappa = self.ricci_factor(x);
        let metric = match self.kind {
            ManifoldKind::LogSurface { .. } => Some(self.surface_metric(x)?),
            _ => None,
        };
        for a in 0..n {
            for b in a..n {
                let ua = &frame[a * amb..(a + 1) * amb];
                let ub = &frame[b * amb..(b + 1) * amb];
                let g = match &metric {
                    Some(m) => m.inner(ua, ub),
                    None => self.flat_inner(ua, ub),
                };
                out[b * n + a] = kappa * g;
                out[a * n + b] = kappa * g;
            }
        }
        Ok(())
    }

    /// Geodesic distance `d_M(o, x)`.
    pub fn dist_to_origin(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.dist_unchecked(x))
    }

    pub(crate) fn dist_unchecked(&self, x: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean(_) | ManifoldKind::LogSurface { .. } => dot(x, x).sqrt(),
            ManifoldKind::Sphere2 => (x[0] * x[0] + x[1] * x[1]).sqrt().atan2(x[2]),
            ManifoldKind::Hyperbolic2 => (x[1] * x[1] + x[2] * x[2]).sqrt().asinh(),
        }
    }

    /// Differential of `d_M(o, ·)` at `x` as an ambient covector (zero at `o`).
    pub fn dist_differential(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.kind {
            ManifoldKind::Euclidean(_) | ManifoldKind::LogSurface { .. } => {
                let r = dot(x, x).sqrt();
                if r > 0.0 {
                    out.iter_mut().zip(x).for_each(|(o, xi)| *o = xi / r);
                }
            }
            ManifoldKind::Sphere2 => {
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if rho > 0.0 {
                    let q = x[2] / ((rho * rho + x[2] * x[2]) * rho);
                    out[0] = q * x[0];
                    out[1] = q * x[1];
                    out[2] = -rho / (rho * rho + x[2] * x[2]);
                }
            }
            ManifoldKind::Hyperbolic2 => {
                let s = (x[1] * x[1] + x[2] * x[2]).sqrt();
                if s > 0.0 {
                    let q = 1.0 / (s * (1.0 + s * s).sqrt());
                    out[1] = q * x[1];
                    out[2] = q * x[2];
                }
            }
        }
    }

    /// Closed-form radial curvature envelopes `(K̃(R), K̃₁(R))`.
    pub fn radial_ricci_bounds(&self, radius: f64) -> Result<(f64, f64)> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::Argument(format!("radius {radius} must be >= 0")));
        }
        Ok(match self.kind {
            ManifoldKind::Euclidean(_) => (0.0, 0.0),
            ManifoldKind::Sphere2 => (1.0, 1.0),
            ManifoldKind::Hyperbolic2 => (1.0, -1.0),
            ManifoldKind::LogSurface { a, b } => {
                let k = a + b * radius.ln_1p();
                (k, -k)
            }
        })
    }

    /// Exact-mode curvature profile with matching parametric constants.
    pub fn profile(&self) -> CurvatureProfile {
        match self.kind {
            ManifoldKind::Euclidean(_) => CurvatureProfile {
                c1: 0.0,
                c2: 0.0,
                delta1: 0.0,
                delta2: 0.0,
                exact: Some(ExactProfile::Constant { kappa: 0.0 }),
            },
            ManifoldKind::Sphere2 => CurvatureProfile {
                c1: 1.0,
                c2: 0.0,
                delta1: 0.0,
                delta2: 0.0,
                exact: Some(ExactProfile::Constant { kappa: 1.0 }),
            },
            ManifoldKind::Hyperbolic2 => CurvatureProfile {
                c1: 1.0,
                c2: 1.0,
                delta1: 0.0,
                delta2: 0.0,
                exact: Some(ExactProfile::Constant { kappa: -1.0 }),
            },
            ManifoldKind::LogSurface { a, b } => {
                let delta1 = 0.01;
                CurvatureProfile {
                    c1: profile::log_growth_c1(a, b, delta1),
                    c2: a,
                    delta1,
                    delta2: b,
                    exact: Some(ExactProfile::LogGrowth { a, b }),
                }
            }
        }
    }

    /// Christoffel contraction `Γ_x(u, v)`, so geodesics satisfy `ẍ + Γ(ẋ, ẋ) = 0`.
    ///
    /// For the embedded instances this is the ambient normal correction.
    pub fn christoffel(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(match self.kind {
            ManifoldKind::Euclidean(n) => vec![0.0; n],
            ManifoldKind::Sphere2 => {
                let s = dot(u, v);
                x.iter().map(|xi| s * xi).collect()
            }
            ManifoldKind::Hyperbolic2 => {
                let s = minkowski(u, v);
                x.iter().map(|xi| -s * xi).collect()
            }
            ManifoldKind::LogSurface { .. } => {
                let acc = SurfaceConnection::at(self.warp(), [x[0], x[1]])?.acceleration([u[0], u[1]], [v[0], v[1]]);
                vec![-acc[0], -acc[1]]
            }
        })
    }

    /// Geodesic endpoint `exp_x(v)`.
    pub fn exp_map(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_step(x, v)?;
        let mut y = x.to_vec();
        let mut none: [f64; 0] = [];
        self.advance(&mut y, &mut none, v)?;
        Ok(y)
    }

    /// Parallel transport of `v` along `t ↦ exp_x(t·w)`, `t ∈ [0,1]`.
    pub fn parallel_transport(&self, x: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_step(x, w)?;
        self.check_tangent(x, v)?;
        let mut y = x.to_vec();
        let mut col = v.to_vec();
        self.advance(&mut y, &mut col, w)?;
        Ok(col)
    }

    fn check_step(&self, x: &[f64], v: &[f64]) -> Result<()> {
        self.check_point(x)?;
        self.check_tangent(x, v)?;
        let len = self.inner(x, v, v)?.max(0.0).sqrt();
        if len > self.step_guard {
            return Err(Error::Argument(format!(
                "step length {len} exceeds the guard {}",
                self.step_guard
            )));
        }
        Ok(())
    }

    /// Moves `x` to `exp_x(v)` and parallel-transports the columns stored in `cols`.
    ///
    /// No guard or tangency checks; the caller validated the inputs.
    pub(crate) fn advance(&self, x: &mut [f64], cols: &mut [f64], v: &[f64]) -> Result<()> {
        let amb = self.ambient_dim();
        match self.kind {
            ManifoldKind::Euclidean(_) => {
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += vi);
            }
            ManifoldKind::Sphere2 => {
                let theta = dot(v, v).sqrt();
                if theta > 0.0 {
                    let (s, c) = theta.sin_cos();
                    let u = [v[0] / theta, v[1] / theta, v[2] / theta];
                    for col in cols.chunks_exact_mut(amb) {
                        let a = dot(col, &u);
                        for i in 0..3 {
                            col[i] += a * ((c - 1.0) * u[i] - s * x[i]);
                        }
                    }
                    for i in 0..3 {
                        x[i] = c * x[i] + s * u[i];
                    }
                }
            }
            ManifoldKind::Hyperbolic2 => {
                let theta = minkowski(v, v).max(0.0).sqrt();
                if theta > 0.0 {
                    let (s, c) = (theta.sinh(), theta.cosh());
                    let u = [v[0] / theta, v[1] / theta, v[2] / theta];
                    for col in cols.chunks_exact_mut(amb) {
                        let a = minkowski(col, &u);
                        for i in 0..3 {
                            col[i] += a * ((c - 1.0) * u[i] + s * x[i]);
                        }
                    }
                    for i in 0..3 {
                        x[i] = c * x[i] + s * u[i];
                    }
                }
            }
            ManifoldKind::LogSurface { .. } => self.advance_surface(x, cols, v)?,
        }
        Ok(())
    }

    fn advance_surface(&self, x: &mut [f64], cols: &mut [f64], v: &[f64]) -> Result<()> {
        const MAX_COLS: usize = 4;
        let ncols = cols.len() / 2;
        assert!(ncols <= MAX_COLS, "at most {MAX_COLS} transported columns");
        let warp = self.warp();
        let len = self.surface_metric(x)?.inner(v, v).max(0.0).sqrt();
        let steps = ((len / self.substep).ceil() as usize).max(1);
        let h = 1.0 / steps as f64;
        let dim = 4 + 2 * ncols;
        let mut state = [0.0_f64; 4 + 2 * MAX_COLS];
        state[0..2].copy_from_slice(&x[0..2]);
        state[2..4].copy_from_slice(&v[0..2]);
        state[4..dim].copy_from_slice(cols);

        let rhs = |s: &[f64], out: &mut [f64]| -> Result<()> {
            let conn = SurfaceConnection::at(warp, [s[0], s[1]])?;
            let u = [s[2], s[3]];
            out[0] = u[0];
            out[1] = u[1];
            let acc = conn.acceleration(u, u);
            out[2] = acc[0];
            out[3] = acc[1];
            for c in 0..ncols {
                let a = conn.acceleration(u, [s[4 + 2 * c], s[5 + 2 * c]]);
                out[4 + 2 * c] = a[0];
                out[5 + 2 * c] = a[1];
            }
            Ok(())
        };

        let mut k1 = [0.0; 4 + 2 * MAX_COLS];
        let mut k2 = k1;
        let mut k3 = k1;
        let mut k4 = k1;
        let mut tmp = k1;
        for _ in 0..steps {
            rhs(&state[..dim], &mut k1).map_err(integration_failure)?;
            for i in 0..dim {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            rhs(&tmp[..dim], &mut k2).map_err(integration_failure)?;
            for i in 0..dim {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            rhs(&tmp[..dim], &mut k3).map_err(integration_failure)?;
            for i in 0..dim {
                tmp[i] = state[i] + h * k3[i];
            }
            rhs(&tmp[..dim], &mut k4).map_err(integration_failure)?;
            for i in 0..dim {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if state[..dim].iter().any(|s| !s.is_finite()) {
                return Err(Error::Integration("non-finite geodesic state".into()));
            }
        }
        x[0..2].copy_from_slice(&state[0..2]);
        cols.copy_from_slice(&state[4..dim]);
        Ok(())
    }

    /// Pulls a point back onto the manifold and re-orthonormalises a flat frame.
    pub(crate) fn reproject(&self, x: &mut [f64], frame: &mut [f64]) -> Result<()> {
        let amb = self.ambient_dim();
        match self.kind {
            ManifoldKind::Euclidean(_) => {}
            ManifoldKind::Sphere2 => {
                let n = dot(x, x).sqrt();
                x.iter_mut().for_each(|c| *c /= n);
                for col in frame.chunks_exact_mut(amb) {
                    let p = dot(col, x);
                    col.iter_mut().zip(x.iter()).for_each(|(c, xi)| *c -= p * xi);
                }
            }
            ManifoldKind::Hyperbolic2 => {
                let q = (-minkowski(x, x)).sqrt();
                x.iter_mut().for_each(|c| *c /= q);
                for col in frame.chunks_exact_mut(amb) {
                    let p = minkowski(col, x);
                    col.iter_mut().zip(x.iter()).for_each(|(c, xi)| *c += p * xi);
                }
            }
            ManifoldKind::LogSurface { .. } => {}
        }
        let metric = match self.kind {
            ManifoldKind::LogSurface { .. } => Some(self.surface_metric(x)?),
            _ => None,
        };
        let ip = |u: &[f64], v: &[f64]| match &metric {
            Some(m) => m.inner(u, v),
            None => self.flat_inner(u, v),
        };
        let cols = frame.len() / amb;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for j in 0..cols {
                for k in 0..j {
                    let (head, tail) = frame.split_at_mut(j * amb);
                    let prev = &head[k * amb..(k + 1) * amb];
                    let cur = &mut tail[..amb];
                    let p = ip(cur, prev);
                    cur.iter_mut().zip(prev).for_each(|(c, q)| *c -= p * q);
                }
                let cur = &mut frame[j * amb..(j + 1) * amb];
                let norm = ip(cur, cur).sqrt();
                if !(norm.is_finite() && norm > 0.0) {
                    return Err(Error::Numeric("degenerate frame during reprojection".into()));
                }
                cur.iter_mut().for_each(|c| *c /= norm);
            }
        }
        Ok(())
    }

    /// Number of built-in coordinate features.
    pub fn feature_count(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean(n) => n,
            ManifoldKind::Sphere2 => 3,
            ManifoldKind::Hyperbolic2 | ManifoldKind::LogSurface { .. } => 2,
        }
    }

    /// Coordinate feature `j` (wrapped modulo [`Self::feature_count`]).
    ///
    /// Embedded coordinates for the sphere, spatial coordinates for the
    /// hyperboloid, chart coordinates otherwise.
    pub fn feature(&self, x: &[f64], j: usize) -> f64 {
        x[self.feature_slot(j)]
    }

    /// Ambient differential of [`Self::feature`].
    pub fn feature_differential(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[self.feature_slot(j)] = 1.0;
    }

    fn feature_slot(&self, j: usize) -> usize {
        let j = j % self.feature_count();
        match self.kind {
            ManifoldKind::Hyperbolic2 => j + 1,
            _ => j,
        }
    }
}

fn integration_failure(e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::Integration(format!("geodesic left the tabulated region: {msg}")),
        other => other,
    }
}

#[derive(Debug, Clone, Copy)]
struct SurfaceMetric {
    phi: f64,
    er: [f64; 2],
}

impl SurfaceMetric {
    fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let ur = u[0] * self.er[0] + u[1] * self.er[1];
        let vr = v[0] * self.er[0] + v[1] * self.er[1];
        self.phi * (u[0] * v[0] + u[1] * v[1]) + (1.0 - self.phi) * ur * vr
    }
}

/// Connection data of the warped surface at one chart point.
///
/// Geodesics solve `ẍ = acc(ẋ, ẋ)` and parallel fields solve `Ẇ = acc(ẋ, W)`,
/// where `acc` is the symmetric form returned by [`SurfaceConnection::acceleration`].
struct SurfaceConnection {
    big_a: f64,
    big_b: f64,
    er: [f64; 2],
}

impl SurfaceConnection {
    fn at(warp: &WarpTable, x: [f64; 2]) -> Result<Self> {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r < 1e-12 {
            return Ok(SurfaceConnection { big_a: 0.0, big_b: 0.0, er: [1.0, 0.0] });
        }
        let (big_a, big_b) = warp.connection(r)?;
        Ok(SurfaceConnection { big_a, big_b, er: [x[0] / r, x[1] / r] })
    }

    fn acceleration(&self, u: [f64; 2], w: [f64; 2]) -> [f64; 2] {
        let er = self.er;
        let et = [-er[1], er[0]];
        let (ur, ut) = (u[0] * er[0] + u[1] * er[1], u[0] * et[0] + u[1] * et[1]);
        let (wr, wt) = (w[0] * er[0] + w[1] * er[1], w[0] * et[0] + w[1] * et[1]);
        let radial = self.big_a * ut * wt;
        let tangential = self.big_b * (ut * wr + ur * wt);
        [
            radial * er[0] + tangential * et[0],
            radial * er[1] + tangential * et[1],
        ]
    }
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn minkowski(u: &[f64], v: &[f64]) -> f64 {
    -u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}
