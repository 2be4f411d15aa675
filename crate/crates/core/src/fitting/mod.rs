//! Parameter extraction from traces and fringe scans.
//!
//! Every fit is a small dense least-squares problem solved by
//! Levenberg–Marquardt with forward-difference Jacobians.

mod damped;
mod fringe;
mod lm;
mod model;

pub use damped::{fit_damped_cosine, guess_damped_cosine, DampedCosineParams};
pub use fringe::{extract_ramsey_fringe, fit_fringe, unwrap_phases, FringeComparison, FringeFit};
pub use model::{
    fit_inhomogeneous_model, simulate_model, FreeParameters, ModelFitOptions, ModelFitParams,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::inhomogeneous::DistributionError;
use crate::sequence::SequenceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate trace: no variation to fit")]
    DegenerateTrace,
    #[error("insufficient fringe coverage: {periods:.2} periods, need at least {needed}")]
    InsufficientCoverage { periods: f64, needed: f64 },
    #[error("trace does not match the sequence template: {0}")]
    TraceMismatch(String),
    #[error("invalid initial parameters: {0}")]
    InvalidInit(&'static str),
    #[error("model evaluation produced non-finite values")]
    NonFinite,
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Outcome of a fit.
///
/// `covariance` is the linearized estimate `s² (JᵀJ)⁻¹` over the free
/// parameters, in the order of `parameter_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<P> {
    pub params: P,
    pub parameter_names: Vec<&'static str>,
    pub covariance: Vec<Vec<f64>>,
    pub residual_rms: f64,
    /// Residual evaluations used by the optimizer (all starts for multi-start fits).
    pub n_iterations: usize,
    pub converged: bool,
    /// Scaled gradient `max_j |∂f/∂x_j| * scale_j` at the solution.
    pub gradient_norm: f64,
}

impl<P> FitResult<P> {
    /// One-sigma uncertainty of a free parameter.
    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        let i = self.parameter_names.iter().position(|n| *n == name)?;
        Some(self.covariance[i][i].max(0.0).sqrt())
    }
}

pub(crate) fn rms(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

pub(crate) fn covariance(jacobian: &DMatrix<f64>, residuals: &DVector<f64>) -> Vec<Vec<f64>> {
    let (m, n) = jacobian.shape();
    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = residuals.norm_squared() / dof;
    let jtj = jacobian.transpose() * jacobian;
    let inv = jtj
        .clone()
        .try_inverse()
        .or_else(|| jtj.pseudo_inverse(1e-14).ok())
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    (0..n)
        .map(|i| (0..n).map(|j| s2 * inv[(i, j)]).collect())
        .collect()
}

/// Least-squares solution of `design * coef ≈ y`.
pub(crate) fn linear_lstsq(design: DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    design.svd(true, true).solve(y, 1e-14).ok()
}

/// Linear fit of `c + a cos(w x) + b sin(w x)`; returns `(a, b, c, rss)`.
pub(crate) fn sinusoid_at(xs: &[f64], ys: &[f64], w: f64) -> Option<(f64, f64, f64, f64)> {
    let m = xs.len();
    let design = DMatrix::from_fn(m, 3, |i, j| match j {
        0 => (w * xs[i]).cos(),
        1 => (w * xs[i]).sin(),
        _ => 1.0,
    });
    let y = DVector::from_column_slice(ys);
    let coef = linear_lstsq(design.clone(), &y)?;
    let rss = (design * &coef - y).norm_squared();
    Some((coef[0], coef[1], coef[2], rss))
}

/// Angular frequency in `[w_lo, w_hi]` whose best-fitting sinusoid leaves the
/// smallest residual, searched on a uniform grid.
pub(crate) fn dominant_frequency(xs: &[f64], ys: &[f64], w_lo: f64, w_hi: f64, grid: usize) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for i in 0..grid {
        let w = w_lo + (w_hi - w_lo) * i as f64 / (grid - 1).max(1) as f64;
        if let Some((_, _, _, rss)) = sinusoid_at(xs, ys, w) {
            if best.is_none_or(|(_, b)| rss < b) {
                best = Some((w, rss));
            }
        }
    }
    best.map(|(w, _)| w)
}

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut p = phi.rem_euclid(TAU);
    if p > PI {
        p -= TAU;
    }
    p
}
