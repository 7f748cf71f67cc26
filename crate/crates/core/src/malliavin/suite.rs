//! Built-in bounded Lipschitz test functions.
//!
//! Factors are of the form `base + amp·tanh(φ(x))`, where `φ` is a coordinate
//! feature of the manifold or the distance to the origin. Products of such
//! factors over several times give genuinely multi-time cylinder functions
//! with closed-form gradients.

use std::sync::Arc;

use super::{CutoffSpec, CylinderFunction, LocalizedFunction};
use crate::error::{Error, Result};
use crate::geometry::ManifoldModel;

/// Scalar feature of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feature {
    /// Coordinate feature `j` of the model (wrapped).
    Coord(usize),
    /// `d(o, x)`.
    Distance,
}

/// One factor `base + amp·tanh(φ(x(t)))` of a product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhFactor {
    pub time: f64,
    pub feature: Feature,
    pub base: f64,
    pub amp: f64,
}

fn feature_value(model: &ManifoldModel, feature: Feature, x: &[f64]) -> f64 {
    match feature {
        Feature::Coord(j) => model.feature(x, j),
        Feature::Distance => model.dist_unchecked(x),
    }
}

fn feature_differential(model: &ManifoldModel, feature: Feature, x: &[f64], out: &mut [f64]) {
    match feature {
        Feature::Coord(j) => model.feature_differential(j, out),
        Feature::Distance => model.dist_differential(x, out),
    }
}

/// `Πᵢ (baseᵢ + ampᵢ·tanh(φᵢ(γ(tᵢ))))` with strictly increasing times.
pub fn tanh_product(model: &ManifoldModel, name: &str, factors: Vec<TanhFactor>) -> Result<CylinderFunction> {
    let times: Vec<f64> = factors.iter().map(|f| f.time).collect();
    let sup: f64 = factors.iter().map(|f| f.base.abs() + f.amp.abs()).product();
    let lip: f64 = factors
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let others: f64 = factors
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != i)
                .map(|(_, g)| g.base.abs() + g.amp.abs())
                .product();
            f.amp.abs() * others
        })
        .sum();
    let fv = Arc::new(factors);
    let (m1, f1) = (model.clone(), fv.clone());
    let value = Arc::new(move |pts: &[&[f64]]| {
        f1.iter()
            .zip(pts)
            .map(|(f, x)| f.base + f.amp * feature_value(&m1, f.feature, x).tanh())
            .product()
    });
    let (m2, f2) = (model.clone(), fv);
    let grad = Arc::new(move |pts: &[&[f64]], slot: usize, out: &mut [f64]| {
        let mut others = 1.0;
        for (l, (f, x)) in f2.iter().zip(pts).enumerate() {
            if l != slot {
                others *= f.base + f.amp * feature_value(&m2, f.feature, x).tanh();
            }
        }
        let f = &f2[slot];
        let th = feature_value(&m2, f.feature, pts[slot]).tanh();
        feature_differential(&m2, f.feature, pts[slot], out);
        let c = others * f.amp * (1.0 - th * th);
        out.iter_mut().for_each(|o| *o *= c);
    });
    Ok(CylinderFunction::new(name, times, value, grad)?.with_bounds(sup, lip))
}

/// `F(γ) = φ_j(γ(t))`, a coordinate feature (unbounded; Lipschitz 1).
pub fn linear(model: &ManifoldModel, t: f64, j: usize) -> Result<CylinderFunction> {
    let (m1, m2) = (model.clone(), model.clone());
    let value = Arc::new(move |pts: &[&[f64]]| m1.feature(pts[0], j));
    let grad = Arc::new(move |_: &[&[f64]], _: usize, out: &mut [f64]| m2.feature_differential(j, out));
    Ok(CylinderFunction::new(format!("linear(t={t},j={j})"), vec![t], value, grad)?.with_bounds(f64::INFINITY, 1.0))
}

/// `F(γ) = exp(λ·φ₀(γ(t))/2 − λ²t/4)`, so that `F² = exp(λφ₀ − λ²t/2)`.
///
/// On flat space `μ(F²) = 1` and `Ent(F²) = λ²t/2 = 2·E(F,F)`.
pub fn gaussian_exponential(model: &ManifoldModel, lambda: f64, t: f64) -> Result<CylinderFunction> {
    let (m1, m2) = (model.clone(), model.clone());
    let shift = lambda * lambda * t / 4.0;
    let value = Arc::new(move |pts: &[&[f64]]| (0.5 * lambda * m1.feature(pts[0], 0) - shift).exp());
    let grad = Arc::new(move |pts: &[&[f64]], _: usize, out: &mut [f64]| {
        let v = (0.5 * lambda * m2.feature(pts[0], 0) - shift).exp();
        m2.feature_differential(0, out);
        out.iter_mut().for_each(|o| *o *= 0.5 * lambda * v);
    });
    CylinderFunction::new(format!("exp(lambda={lambda},t={t})"), vec![t], value, grad)
}

/// Radius of the cutoff used by the default suite.
pub const DEFAULT_CUTOFF_RADIUS: f64 = 2.5;

/// Times at which the default cutoff evaluates `ρ^m`.
pub fn default_cutoff_times() -> Vec<f64> {
    (1..=8).map(|k| k as f64 / 8.0).collect()
}

/// The five-function default suite. All times are dyadic.
pub fn default_suite(model: &ManifoldModel) -> Result<Vec<LocalizedFunction>> {
    let f = |time, feature, base, amp| TanhFactor { time, feature, base, amp };
    let c = Feature::Coord;
    Ok(vec![
        LocalizedFunction::plain(tanh_product(model, "coord-tanh", vec![f(1.0, c(0), 1.0, 0.5)])?),
        LocalizedFunction::plain(tanh_product(model, "dist-tanh", vec![f(1.0, Feature::Distance, 0.5, 1.0)])?),
        LocalizedFunction::plain(tanh_product(
            model,
            "two-time",
            vec![f(0.5, c(0), 1.0, 0.3), f(1.0, c(1), 1.0, 0.3)],
        )?),
        LocalizedFunction::plain(tanh_product(
            model,
            "three-time",
            vec![f(0.25, c(0), 1.0, 0.25), f(0.5, c(1), 1.0, 0.25), f(1.0, c(2), 1.0, 0.25)],
        )?),
        LocalizedFunction::with_cutoff(
            tanh_product(model, "localized", vec![f(0.75, c(0), 1.0, 0.5)])?,
            CutoffSpec::new(DEFAULT_CUTOFF_RADIUS)?,
            default_cutoff_times(),
        )?,
    ])
}

/// Linear functionals `φ_j(γ(t))` at a few dyadic times.
pub fn linear_suite(model: &ManifoldModel) -> Result<Vec<LocalizedFunction>> {
    [(0.25, 0), (0.5, 0), (1.0, 1)]
        .into_iter()
        .map(|(t, j)| linear(model, t, j).map(LocalizedFunction::plain))
        .collect()
}

/// Names accepted by [`suite_by_name`].
pub const SUITE_NAMES: [&str; 3] = ["default", "linear", "gaussian"];

pub fn suite_by_name(model: &ManifoldModel, name: &str) -> Result<Vec<LocalizedFunction>> {
    match name {
        "default" => default_suite(model),
        "linear" => linear_suite(model),
        "gaussian" => Ok(vec![
            LocalizedFunction::plain(gaussian_exponential(model, 1.0, 1.0)?),
            LocalizedFunction::plain(CylinderFunction::constant(1.0)),
        ]),
        other => Err(Error::Argument(format!(
            "unknown suite {other:?}; expected one of {SUITE_NAMES:?}"
        ))),
    }
}
