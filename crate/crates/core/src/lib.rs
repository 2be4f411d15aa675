//! Simulation and fitting of two-level atomic ensembles probed by a Gaussian
//! beam whose differential light shift varies across the sample.
//!
//! - [`bloch`]: rotation matrices for drive, shift and both together.
//! - [`inhomogeneous`]: the light-shift weight and its Gauss quadrature.
//! - [`probe`]: dispersive phase shift, photon calibration, decoherence.
//! - [`sequence`]: Rabi, Ramsey and spin-echo pulse sequences and their
//!   ensemble propagation.
//! - [`fitting`]: damped-cosine, full-model and fringe fits.

pub mod bloch;
pub mod fitting;
pub mod inhomogeneous;
pub mod probe;
pub mod sequence;

pub use bloch::{combined_rotation, drive_rotation, shift_rotation, BlochVector, Rotation3};
pub use fitting::{FitError, FitResult};
pub use inhomogeneous::{
    build_quadrature, DistributionError, LightShiftDistribution, QuadratureRule, SampleGeometry,
    DEFAULT_NODES,
};
pub use probe::{DecoherenceModel, ProbeCalibration, ProbeOpticalParams};
pub use sequence::{
    run_experiment, EchoProtocol, KickPlacement, PulseSequence, RamseyProtocol, Segment, SequenceError,
    TraceSample,
};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Fit(#[from] FitError),
}
