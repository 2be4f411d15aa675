//! Shared fixtures for the benchmarks.

use std::f64::consts::{FRAC_PI_6, TAU};

use lightshift_core::fitting::{simulate_model, ModelFitParams};
use lightshift_core::sequence::build_rabi;
use lightshift_core::{
    build_quadrature, BlochVector, LightShiftDistribution, PulseSequence, QuadratureRule, TraceSample,
};

pub const OMEGA: f64 = TAU * 8e3;
pub const K_RATIO: f64 = 0.35;
pub const KICK: f64 = 0.3;

pub fn quadrature(nodes: usize) -> QuadratureRule {
    build_quadrature(&LightShiftDistribution::new(KICK, K_RATIO).unwrap(), nodes).unwrap()
}

/// Stroboscopic Rabi sequence with `pulses` drive steps of pi/6.
pub fn rabi_sequence(pulses: usize) -> PulseSequence {
    build_rabi(pulses, OMEGA, FRAC_PI_6, KICK).unwrap()
}

/// Unit-kick template and the noiseless trace it produces at `truth`.
pub fn model_fit_problem(pulses: usize, nodes: usize) -> (PulseSequence, Vec<TraceSample>, ModelFitParams) {
    let template = build_rabi(pulses, OMEGA, FRAC_PI_6, 1.0).unwrap();
    let truth = ModelFitParams::ideal(OMEGA, 0.2, K_RATIO);
    let trace = simulate_model(&template, &truth, nodes, &BlochVector::GROUND).unwrap();
    (template, trace, ModelFitParams::ideal(OMEGA * 1.002, 0.15, K_RATIO))
}
