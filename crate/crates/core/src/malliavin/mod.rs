//! Cylinder functions, the Ornstein–Uhlenbeck gradient and the Ricci-damped operators.
//!
//! For `F(γ) = f(γ(t₁),…,γ(t_m))` the gradient `DF ∈ H` has derivative
//! `Σᵢ 1_{[0,tᵢ)}·aᵢ`, where `aᵢ = U_{tᵢ}⁻¹∇ᵢf` are the frame coordinates of
//! the slot gradients. Gradient oracles return ambient covectors `∂ᵢf`; since
//! frames are orthonormal, `aᵢ = (∂ᵢf(U e_j))_j`.
//!
//! The damped operator acts on derivatives:
//!
//! ```text
//! (Âh)'(r) = h'(r) − ½ (Φ_r*)⁻¹ ∫_r¹ Φ_s* Ric_s h'(s) ds
//! (Ãh)'(r) = h'(r) + ½ ∫_r¹ Ric_s h'(s) ds
//! ```
//!
//! and `Ã` is the two-sided inverse of `Â`.

pub mod suite;

use std::fmt;
use std::sync::Arc;

use crate::cmspace::CMVector;
use crate::error::{Error, Result};
use crate::geometry::ManifoldModel;
use crate::pathsim::{matmul, rho_m_argmax, HorizontalPath, RicciFlow};

/// `f(x₁,…,x_m)` evaluated on the points at the function's times.
pub type ValueFn = Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>;
/// Writes the ambient covector `∂ᵢf(x₁,…,x_m)` of slot `i` into the buffer.
pub type GradFn = Arc<dyn Fn(&[&[f64]], usize, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct CylinderFunction {
    name: String,
    times: Vec<f64>,
    value: ValueFn,
    grad: GradFn,
    /// Upper bound of `|f|`.
    pub sup_bound: f64,
    /// Lipschitz constant of `f` (metadata only).
    pub lipschitz: f64,
}

impl fmt::Debug for CylinderFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunction")
            .field("name", &self.name)
            .field("times", &self.times)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl CylinderFunction {
    pub fn new(name: impl Into<String>, times: Vec<f64>, value: ValueFn, grad: GradFn) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Argument("a cylinder function needs at least one time".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) || times[0] <= 0.0 || times[times.len() - 1] > 1.0 {
            return Err(Error::Argument(format!("times {times:?} must increase within (0, 1]")));
        }
        Ok(CylinderFunction {
            name: name.into(),
            times,
            value,
            grad,
            sup_bound: f64::INFINITY,
            lipschitz: f64::INFINITY,
        })
    }

    pub fn with_bounds(mut self, sup_bound: f64, lipschitz: f64) -> Self {
        self.sup_bound = sup_bound;
        self.lipschitz = lipschitz;
        self
    }

    /// The constant function.
    pub fn constant(c: f64) -> Self {
        CylinderFunction {
            name: format!("const({c})"),
            times: vec![1.0],
            value: Arc::new(move |_| c),
            grad: Arc::new(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0)),
            sup_bound: c.abs(),
            lipschitz: 0.0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn nodes(&self, path: &HorizontalPath) -> Result<Vec<usize>> {
        self.times.iter().map(|&t| path.grid().index_of(t)).collect()
    }

    /// Evaluates `f` on explicit points (one per time).
    pub fn value_at(&self, points: &[&[f64]]) -> f64 {
        (self.value)(points)
    }

    /// Ambient covector of slot `i` at explicit points.
    pub fn gradient_at(&self, points: &[&[f64]], slot: usize, out: &mut [f64]) {
        (self.grad)(points, slot, out)
    }

    pub fn eval(&self, path: &HorizontalPath) -> Result<f64> {
        let nodes = self.nodes(path)?;
        let pts: Vec<&[f64]> = nodes.iter().map(|&k| path.point(k)).collect();
        Ok((self.value)(&pts))
    }

    /// Frame coordinates `aᵢ` of the slot gradients, flattened `m × n`, with the grid nodes.
    pub fn frame_gradients(&self, path: &HorizontalPath) -> Result<(Vec<usize>, Vec<f64>)> {
        let nodes = self.nodes(path)?;
        let pts: Vec<&[f64]> = nodes.iter().map(|&k| path.point(k)).collect();
        let (amb, n) = (path.ambient_dim(), path.dim());
        let mut cov = vec![0.0; amb];
        let mut out = vec![0.0; nodes.len() * n];
        for (i, &k) in nodes.iter().enumerate() {
            (self.grad)(&pts, i, &mut cov);
            frame_coordinates(path.frame_flat(k), &cov, &mut out[i * n..(i + 1) * n]);
        }
        Ok((nodes, out))
    }
}

/// `a_j = ⟨cov, U e_j⟩` (plain contraction).
fn frame_coordinates(frame: &[f64], cov: &[f64], out: &mut [f64]) {
    let amb = cov.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = frame[j * amb..(j + 1) * amb].iter().zip(cov).map(|(u, c)| u * c).sum();
    }
}

/// `DF(γ)`.
pub fn ou_gradient(f: &CylinderFunction, path: &HorizontalPath) -> Result<CMVector> {
    let (nodes, a) = f.frame_gradients(path)?;
    Ok(gradient_from_slots(path, &nodes, &a))
}

/// Derivative `Σᵢ 1_{[0, s_{node_i})} aᵢ`.
fn gradient_from_slots(path: &HorizontalPath, nodes: &[usize], a: &[f64]) -> CMVector {
    let n = path.dim();
    let mut h = CMVector::zeros(path.grid(), n);
    let d = h.derivative_mut();
    // suffix sums over the slots, applied cell by cell
    let mut acc = vec![0.0; n];
    let mut slot = nodes.len();
    for k in (0..path.grid().steps()).rev() {
        while slot > 0 && nodes[slot - 1] > k {
            slot -= 1;
            for j in 0..n {
                acc[j] += a[slot * n + j];
            }
        }
        d[k * n..(k + 1) * n].copy_from_slice(&acc);
    }
    h
}

/// `∂_h F(γ) = Σᵢ ∂ᵢf(U_{tᵢ} h(tᵢ))`.
pub fn directional_derivative(f: &CylinderFunction, path: &HorizontalPath, h: &CMVector) -> Result<f64> {
    if h.grid() != path.grid() || h.dim() != path.dim() {
        return Err(Error::Argument("direction lives on a different grid".into()));
    }
    let nodes = f.nodes(path)?;
    let pts: Vec<&[f64]> = nodes.iter().map(|&k| path.point(k)).collect();
    let amb = path.ambient_dim();
    let mut cov = vec![0.0; amb];
    let mut total = 0.0;
    for (i, &k) in nodes.iter().enumerate() {
        (f.grad)(&pts, i, &mut cov);
        let hv = h.value_at(k);
        let frame = path.frame(k);
        let v = frame.apply(&hv);
        total += cov.iter().zip(&v).map(|(c, x)| c * x).sum::<f64>();
    }
    Ok(total)
}

/// Quintic smoothstep cutoff: `l_R = 1` on `|r| ≤ R−1`, `0` on `|r| ≥ R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    radius: f64,
}

impl CutoffSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 1.0) {
            return Err(Error::Argument(format!("cutoff radius {radius} must be >= 1")));
        }
        Ok(CutoffSpec { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn value(&self, r: f64) -> f64 {
        let u = r.abs() - (self.radius - 1.0);
        if u <= 0.0 {
            1.0
        } else if u >= 1.0 {
            0.0
        } else {
            1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let u = r.abs() - (self.radius - 1.0);
        if u <= 0.0 || u >= 1.0 {
            0.0
        } else {
            -30.0 * u * u * (1.0 - u) * (1.0 - u) * r.signum()
        }
    }

    /// `sup |l_R'| = 15/8`.
    pub fn sup_derivative(&self) -> f64 {
        1.875
    }
}

/// `F·l(ρ^m)` with the cutoff evaluated at the listed grid times.
#[derive(Debug, Clone)]
pub struct LocalizedFunction {
    pub base: CylinderFunction,
    pub cutoff: Option<(CutoffSpec, Vec<f64>)>,
}

/// Gradient of a localized function and whether the `ρ^m` argmax was tied.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedGradient {
    pub gradient: CMVector,
    pub tie: bool,
}

impl LocalizedFunction {
    pub fn plain(base: CylinderFunction) -> Self {
        LocalizedFunction { base, cutoff: None }
    }

    pub fn with_cutoff(base: CylinderFunction, cutoff: CutoffSpec, times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Argument("cutoff needs at least one time".into()));
        }
        Ok(LocalizedFunction {
            base,
            cutoff: Some((cutoff, times)),
        })
    }

    pub fn name(&self) -> &str {
        self.base.name()
    }

    pub fn eval(&self, model: &ManifoldModel, path: &HorizontalPath) -> Result<f64> {
        let v = self.base.eval(path)?;
        match &self.cutoff {
            None => Ok(v),
            Some((l, times)) => Ok(v * l.value(rho_m_argmax(model, path, times)?.radius)),
        }
    }
}

/// `D(F·l(ρ^m)) = l(ρ^m)·DF + F·l'(ρ^m)·Dρ^m`.
pub fn localized_gradient(
    model: &ManifoldModel,
    f: &LocalizedFunction,
    path: &HorizontalPath,
) -> Result<LocalizedGradient> {
    let df = ou_gradient(&f.base, path)?;
    let Some((l, times)) = &f.cutoff else {
        return Ok(LocalizedGradient { gradient: df, tie: false });
    };
    let arg = rho_m_argmax(model, path, times)?;
    let lv = l.value(arg.radius);
    let ld = l.derivative(arg.radius);
    let mut g = df.scaled(lv);
    if ld != 0.0 {
        let fv = f.base.eval(path)?;
        let drho = radial_gradient(model, path, arg.node);
        g = g.add_scaled(fv * ld, &drho)?;
    }
    Ok(LocalizedGradient { gradient: g, tie: arg.tie })
}

/// `D l(ρ^m)` alone, the quantity bounded by `sup|l'|`.
pub fn cutoff_gradient(model: &ManifoldModel, l: &CutoffSpec, times: &[f64], path: &HorizontalPath) -> Result<CMVector> {
    let arg = rho_m_argmax(model, path, times)?;
    Ok(radial_gradient(model, path, arg.node).scaled(l.derivative(arg.radius)))
}

/// `Dρ^m = 1_{[0,t*)}·U_{t*}⁻¹∇d(·, o)` at the argmax node `t*`.
fn radial_gradient(model: &ManifoldModel, path: &HorizontalPath, node: usize) -> CMVector {
    let n = path.dim();
    let mut cov = vec![0.0; path.ambient_dim()];
    model.dist_differential(path.point(node), &mut cov);
    let mut a = vec![0.0; n];
    frame_coordinates(path.frame_flat(node), &cov, &mut a);
    gradient_from_slots(path, &[node], &a)
}

fn check_flow(flow: &RicciFlow, h: &CMVector) -> Result<()> {
    if flow.nodes() != h.grid().steps() + 1 || flow.dim() != h.dim() {
        return Err(Error::Argument("Ricci flow and Cameron–Martin vector use different grids".into()));
    }
    Ok(())
}

/// The damped operator `Â(γ)`, evaluated at cell midpoints.
///
/// The inner integral uses the trapezoid rule on nodes and a half-cell
/// trapezoid from the midpoint, with `Φ` and `Ric` interpolated linearly.
pub fn damped_apply(flow: &RicciFlow, h: &CMVector) -> Result<CMVector> {
    check_flow(flow, h)?;
    let n = h.dim();
    let s = n * n;
    let steps = h.grid().steps();
    let dt = h.grid().dt();
    // F_k = Φ_kᵀ R_k
    let mut fk = vec![0.0; (steps + 1) * s];
    let mut tr = vec![0.0; s];
    for k in 0..=steps {
        transpose(n, flow.phi_flat(k), &mut tr);
        matmul(n, &tr, flow.ric_flat(k), &mut fk[k * s..(k + 1) * s]);
    }
    let mut out = CMVector::zeros(h.grid(), n);
    let hd = h.derivative_flat();
    let od = out.derivative_mut();
    let mut j_node = vec![0.0; n];
    let mut phim = vec![0.0; s];
    let mut rm = vec![0.0; s];
    let mut fm = vec![0.0; s];
    let mut jm = vec![0.0; n];
    let mut scratch = vec![0.0; s];
    for k in (0..steps).rev() {
        let hk = &hd[k * n..(k + 1) * n];
        let f0 = &fk[k * s..(k + 1) * s];
        let f1 = &fk[(k + 1) * s..(k + 2) * s];
        let (p0, p1) = (flow.phi_flat(k), flow.phi_flat(k + 1));
        let (r0, r1) = (flow.ric_flat(k), flow.ric_flat(k + 1));
        for i in 0..s {
            phim[i] = 0.5 * (p0[i] + p1[i]);
            rm[i] = 0.5 * (r0[i] + r1[i]);
        }
        transpose(n, &phim, &mut tr);
        matmul(n, &tr, &rm, &mut fm);
        // J(m_k) = J(s_{k+1}) + ∫_{m_k}^{s_{k+1}} Φᵀ R h'_k
        for i in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += 0.25 * dt * (fm[l * n + i] + f1[l * n + i]) * hk[l];
            }
            jm[i] = j_node[i] + acc;
        }
        // (Φ_{m_k}ᵀ)⁻¹ J(m_k)
        scratch.copy_from_slice(&tr);
        solve_in_place(n, &mut scratch, &mut jm).map_err(|_| Error::Numeric(format!("Φ singular near cell {k}")))?;
        for i in 0..n {
            od[k * n + i] = hk[i] - 0.5 * jm[i];
        }
        // advance J to node k
        for i in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += 0.5 * dt * (f0[l * n + i] + f1[l * n + i]) * hk[l];
            }
            j_node[i] += acc;
        }
    }
    Ok(out)
}

/// The inverse `Ã(γ)` of [`damped_apply`], evaluated at cell midpoints with
/// the integral of the linearly interpolated `Ric` taken exactly.
pub fn damped_inverse(flow: &RicciFlow, h: &CMVector) -> Result<CMVector> {
    check_flow(flow, h)?;
    let n = h.dim();
    let steps = h.grid().steps();
    let dt = h.grid().dt();
    let hd = h.derivative_flat();
    let mut out = CMVector::zeros(h.grid(), n);
    let od = out.derivative_mut();
    let mut tail = vec![0.0; n];
    for k in (0..steps).rev() {
        let hk = &hd[k * n..(k + 1) * n];
        let (r0, r1) = (flow.ric_flat(k), flow.ric_flat(k + 1));
        for i in 0..n {
            let mut half = 0.0;
            let mut full = 0.0;
            for l in 0..n {
                let (a, b) = (r0[l * n + i], r1[l * n + i]);
                half += 0.125 * dt * (a + 3.0 * b) * hk[l];
                full += 0.5 * dt * (a + b) * hk[l];
            }
            od[k * n + i] = hk[i] + 0.5 * (tail[i] + half);
            tail[i] += full;
        }
    }
    Ok(out)
}

/// The lift `h ↦ h̃` with `h̃' = ½ Ric^♯ h + h'`, `h̃(0) = 0`.
///
/// This is the adjoint of [`damped_inverse`]: `⟨Ã g, h⟩_H = ⟨g, h̃⟩_H`.
pub fn tilde_lift(flow: &RicciFlow, h: &CMVector) -> Result<CMVector> {
    check_flow(flow, h)?;
    let n = h.dim();
    let steps = h.grid().steps();
    let dt = h.grid().dt();
    let hd = h.derivative_flat();
    let mut out = CMVector::zeros(h.grid(), n);
    let od = out.derivative_mut();
    let mut val = vec![0.0; n];
    for k in 0..steps {
        let hk = &hd[k * n..(k + 1) * n];
        let (r0, r1) = (flow.ric_flat(k), flow.ric_flat(k + 1));
        // exact cell average of R(t)·h(t) for linear R and h on the cell
        for i in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                let (a, b) = (r0[l * n + i], r1[l * n + i]);
                let (h0, h1) = (val[l], val[l] + dt * hk[l]);
                acc += (2.0 * a * h0 + a * h1 + b * h0 + 2.0 * b * h1) / 6.0;
            }
            od[k * n + i] = hk[i] + 0.5 * acc;
        }
        for l in 0..n {
            val[l] += dt * hk[l];
        }
    }
    Ok(out)
}

fn transpose(n: usize, a: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = a[j * n + i];
        }
    }
}

/// Solves `a x = b` (column-major `a`, overwritten) by partial-pivot elimination.
fn solve_in_place(n: usize, a: &mut [f64], b: &mut [f64]) -> std::result::Result<(), ()> {
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| a[c * n + x].abs().total_cmp(&a[c * n + y].abs()))
            .unwrap_or(c);
        let pv = a[c * n + piv];
        if !(pv.abs() > 1e-300) || !pv.is_finite() {
            return Err(());
        }
        if piv != c {
            for col in 0..n {
                a.swap(col * n + c, col * n + piv);
            }
            b.swap(c, piv);
        }
        for r in c + 1..n {
            let f = a[c * n + r] / a[c * n + c];
            if f != 0.0 {
                for col in c..n {
                    a[col * n + r] -= f * a[col * n + c];
                }
                b[r] -= f * b[c];
            }
        }
    }
    for c in (0..n).rev() {
        let mut s = b[c];
        for col in c + 1..n {
            s -= a[col * n + c] * b[col];
        }
        b[c] = s / a[c * n + c];
    }
    Ok(())
}
