//! Brownian motion on Riemannian manifolds and the analysis of its path space.
//!
//! The crate samples horizontal Brownian paths on four concrete surfaces
//! (flat space, the round sphere, the hyperbolic plane and a rotationally
//! symmetric surface with logarithmically growing negative curvature),
//! builds the Ornstein–Uhlenbeck gradient and its Ricci-damped variant on
//! Cameron–Martin space, and estimates both sides of the log-Sobolev,
//! weighted log-Sobolev and Poincaré inequalities by Monte Carlo.
//!
//! Module map:
//!
//! * [`geometry`] – closed-form and RK4 geometry kernels, curvature profiles.
//! * [`pathsim`] – time grids, geodesic random walk, the Ricci flow `Φ`.
//! * [`cmspace`] – Cameron–Martin vectors, wedge vectors, the Haar basis.
//! * [`malliavin`] – cylinder functions, gradients, cutoffs, damped operators.
//! * [`inequalities`] – Monte-Carlo estimators, inequality reports, rate functions.
//! * [`diffusion`] – diagonal diffusion operators in Haar coordinates.

pub mod cmspace;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod inequalities;
pub mod malliavin;
pub mod mc;
pub mod pathsim;

pub use error::{Error, Result};
