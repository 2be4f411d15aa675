//! Pulse-sequence engine.
//!
//! A sequence is an ordered list of resonant drive pulses, instantaneous probe
//! kicks and detuned free evolution. Each light-shift class is propagated on
//! its own (kick angles scaled by the class's `chi / chi0`), and the detected
//! signal is the quadrature-weighted 3-projection at every recording kick.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use thiserror::Error;

use crate::bloch::{BlochVector, Rotation3};
use crate::inhomogeneous::QuadratureRule;
use crate::probe::{apply_decoherence, DecoherenceModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("pulse sequence is empty")]
    Empty,
    #[error("pulse sequence has no recording probe kick")]
    NoReadout,
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: &'static str },
    #[error("a stroboscopic sequence needs at least one pulse")]
    ZeroPulses,
    #[error("rabi frequency must be positive and finite, got {0}")]
    RabiFrequency(f64),
    #[error("interval length must be non-negative and finite, got {0}")]
    Interval(f64),
    #[error("kick offset {offset} outside the interval [0, {limit}]")]
    OffsetOutOfRange { offset: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Resonant drive about axis 1 by `rabi_frequency * duration`.
    Drive { rabi_frequency: f64, duration: f64 },
    /// Instantaneous light-shift kick about axis 3; `peak_phase` is the angle
    /// at the beam center (`chi0 * t_pulse`).
    ProbeKick { peak_phase: f64, record: bool },
    /// Free precession at `detuning` (Hz, signed) for `duration`.
    FreeEvolution { duration: f64, detuning: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Drive { duration, .. } | Segment::FreeEvolution { duration, .. } => duration,
            Segment::ProbeKick { .. } => 0.0,
        }
    }

    /// Rotation for a class whose shift is `chi_scale` times the peak.
    pub fn rotation(&self, chi_scale: f64) -> Rotation3 {
        match *self {
            Segment::Drive {
                rabi_frequency,
                duration,
            } => Rotation3::about_axis1(rabi_frequency * duration),
            Segment::ProbeKick { peak_phase, .. } => Rotation3::about_axis3(chi_scale * peak_phase),
            Segment::FreeEvolution { duration, detuning } => {
                Rotation3::about_axis3(TAU * detuning * duration)
            }
        }
    }

    fn validate(&self) -> Result<(), &'static str> {
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        match *self {
            Segment::Drive {
                rabi_frequency,
                duration,
            } => {
                if !nonneg(rabi_frequency) {
                    return Err("drive rabi frequency must be non-negative");
                }
                if !nonneg(duration) {
                    return Err("drive duration must be non-negative");
                }
            }
            Segment::ProbeKick { peak_phase, .. } => {
                if !peak_phase.is_finite() {
                    return Err("kick phase must be finite");
                }
            }
            Segment::FreeEvolution { duration, detuning } => {
                if !nonneg(duration) {
                    return Err("free evolution duration must be non-negative");
                }
                if !detuning.is_finite() {
                    return Err("detuning must be finite");
                }
            }
        }
        Ok(())
    }
}

/// A validated, non-empty list of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>) -> Result<Self, SequenceError> {
        if segments.is_empty() {
            return Err(SequenceError::Empty);
        }
        for (index, seg) in segments.iter().enumerate() {
            seg.validate()
                .map_err(|reason| SequenceError::InvalidSegment { index, reason })?;
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Total drive plus free-evolution time.
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn recording_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::ProbeKick { record: true, .. }))
            .count()
    }

    /// Times of the recording kicks.
    pub fn record_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.recording_count());
        for seg in &self.segments {
            if let Segment::ProbeKick { record: true, .. } = seg {
                out.push(t);
            }
            t += seg.duration();
        }
        out
    }

    /// Copy with every kick phase multiplied by `factor`.
    pub fn with_kick_scale(&self, factor: f64) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::ProbeKick { peak_phase, record } => Segment::ProbeKick {
                    peak_phase: peak_phase * factor,
                    record,
                },
                other => other,
            })
            .collect();
        Self { segments }
    }

    /// Copy with every drive set to `rabi_frequency`, durations unchanged.
    pub fn with_rabi_frequency(&self, rabi_frequency: f64) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Drive { duration, .. } => Segment::Drive {
                    rabi_frequency,
                    duration,
                },
                other => other,
            })
            .collect();
        Self { segments }
    }

    /// Overall coherent transfer matrix for one class, accumulated by
    /// left-multiplication.
    pub fn transfer_matrix(&self, chi_scale: f64) -> Rotation3 {
        self.segments
            .iter()
            .fold(Rotation3::IDENTITY, |acc, seg| seg.rotation(chi_scale) * acc)
    }
}

/// A point of a detected trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub time: f64,
    pub population_p4: f64,
}

/// Propagates one light-shift class and returns `(time, state)` at every
/// recording kick. Decoherence is applied after each segment.
pub fn propagate_class(
    seq: &PulseSequence,
    chi_scale: f64,
    dec: &DecoherenceModel,
    s0: &BlochVector,
) -> Result<Vec<(f64, BlochVector)>, SequenceError> {
    if seq.is_empty() {
        return Err(SequenceError::Empty);
    }
    if seq.recording_count() == 0 {
        return Err(SequenceError::NoReadout);
    }
    Ok(propagate_unchecked(seq, chi_scale, dec, s0))
}

fn propagate_unchecked(
    seq: &PulseSequence,
    chi_scale: f64,
    dec: &DecoherenceModel,
    s0: &BlochVector,
) -> Vec<(f64, BlochVector)> {
    let mut out = Vec::with_capacity(seq.recording_count());
    let mut s = *s0;
    let mut t = 0.0;
    for seg in seq.segments() {
        s = seg.rotation(chi_scale).apply(&s);
        match *seg {
            Segment::ProbeKick { record, .. } => {
                s = apply_decoherence(&s, dec, 0.0, 1);
                if record {
                    out.push((t, s));
                }
            }
            Segment::Drive { duration, .. } | Segment::FreeEvolution { duration, .. } => {
                s = apply_decoherence(&s, dec, duration, 0);
                t += duration;
            }
        }
    }
    out
}

/// Ensemble trace: each quadrature class is propagated independently and the
/// 3-projections are combined with the rule's weights in node order.
pub fn run_experiment(
    seq: &PulseSequence,
    quad: &QuadratureRule,
    dec: &DecoherenceModel,
    s0: &BlochVector,
) -> Result<Vec<TraceSample>, SequenceError> {
    if seq.recording_count() == 0 {
        return Err(SequenceError::NoReadout);
    }
    let per_class: Vec<Vec<(f64, BlochVector)>> = quad
        .scales()
        .par_iter()
        .map(|&u| propagate_unchecked(seq, u, dec, s0))
        .collect();

    let n_records = per_class[0].len();
    let mut values = vec![0.0; per_class.len()];
    let trace = (0..n_records)
        .map(|r| {
            for (v, class) in values.iter_mut().zip(&per_class) {
                *v = class[r].1.s3;
            }
            TraceSample {
                time: per_class[0][r].0,
                population_p4: 0.5 * (1.0 + quad.average(&values)),
            }
        })
        .collect();
    Ok(trace)
}

/// Generalized Rabi frequency `sqrt(omega² + shift²)` for a time-averaged
/// shift `mean_shift` (rad/s).
pub fn effective_rabi_frequency(rabi_frequency: f64, mean_shift: f64) -> f64 {
    rabi_frequency.hypot(mean_shift)
}

/// `n_pulses` repetitions of a drive step of `drive_step` rad followed by a
/// recording kick of `kick` rad peak phase.
pub fn build_rabi(
    n_pulses: usize,
    rabi_frequency: f64,
    drive_step: f64,
    kick: f64,
) -> Result<PulseSequence, SequenceError> {
    if n_pulses == 0 {
        return Err(SequenceError::ZeroPulses);
    }
    check_rabi_frequency(rabi_frequency)?;
    let duration = drive_step / rabi_frequency;
    let mut segments = Vec::with_capacity(2 * n_pulses);
    for _ in 0..n_pulses {
        segments.push(Segment::Drive {
            rabi_frequency,
            duration,
        });
        segments.push(Segment::ProbeKick {
            peak_phase: kick,
            record: true,
        });
    }
    PulseSequence::new(segments)
}

/// A light-shift kick placed `offset` seconds into an evolution interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickPlacement {
    pub offset: f64,
    pub peak_phase: f64,
}

impl KickPlacement {
    pub fn new(offset: f64, peak_phase: f64) -> Self {
        Self { offset, peak_phase }
    }
}

fn check_rabi_frequency(rabi_frequency: f64) -> Result<(), SequenceError> {
    if rabi_frequency.is_finite() && rabi_frequency > 0.0 {
        Ok(())
    } else {
        Err(SequenceError::RabiFrequency(rabi_frequency))
    }
}

fn push_pulse(segments: &mut Vec<Segment>, rabi_frequency: f64, angle: f64) {
    segments.push(Segment::Drive {
        rabi_frequency,
        duration: angle / rabi_frequency,
    });
}

/// Free evolution of `length` with non-recording kicks at the given offsets.
fn push_interval(
    segments: &mut Vec<Segment>,
    length: f64,
    detuning: f64,
    kicks: &[KickPlacement],
) -> Result<(), SequenceError> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(SequenceError::Interval(length));
    }
    let mut sorted = kicks.to_vec();
    for k in &sorted {
        if !(k.offset >= 0.0 && k.offset <= length) {
            return Err(SequenceError::OffsetOutOfRange {
                offset: k.offset,
                limit: length,
            });
        }
    }
    sorted.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    let mut at = 0.0;
    for k in &sorted {
        if k.offset > at {
            segments.push(Segment::FreeEvolution {
                duration: k.offset - at,
                detuning,
            });
            at = k.offset;
        }
        segments.push(Segment::ProbeKick {
            peak_phase: k.peak_phase,
            record: false,
        });
    }
    if length > at {
        segments.push(Segment::FreeEvolution {
            duration: length - at,
            detuning,
        });
    }
    Ok(())
}

/// Ramsey sequence: pi/2, free evolution with kicks, pi/2, readout.
pub fn build_ramsey(
    rabi_frequency: f64,
    free_time: f64,
    detuning: f64,
    probe_kicks: &[KickPlacement],
) -> Result<PulseSequence, SequenceError> {
    check_rabi_frequency(rabi_frequency)?;
    let mut segments = Vec::new();
    push_pulse(&mut segments, rabi_frequency, FRAC_PI_2);
    push_interval(&mut segments, free_time, detuning, probe_kicks)?;
    push_pulse(&mut segments, rabi_frequency, FRAC_PI_2);
    segments.push(Segment::ProbeKick {
        peak_phase: 0.0,
        record: true,
    });
    PulseSequence::new(segments)
}

/// Spin-echo sequence: pi/2, first half with `kicks_before`, pi, second half
/// of `half_time + readout_offset` with `kicks_after`, pi/2, readout.
pub fn build_echo(
    rabi_frequency: f64,
    half_time: f64,
    detuning: f64,
    kicks_before: &[KickPlacement],
    kicks_after: &[KickPlacement],
    readout_offset: f64,
) -> Result<PulseSequence, SequenceError> {
    check_rabi_frequency(rabi_frequency)?;
    let mut segments = Vec::new();
    push_pulse(&mut segments, rabi_frequency, FRAC_PI_2);
    push_interval(&mut segments, half_time, detuning, kicks_before)?;
    push_pulse(&mut segments, rabi_frequency, PI);
    push_interval(&mut segments, half_time + readout_offset, detuning, kicks_after)?;
    push_pulse(&mut segments, rabi_frequency, FRAC_PI_2);
    segments.push(Segment::ProbeKick {
        peak_phase: 0.0,
        record: true,
    });
    PulseSequence::new(segments)
}

fn final_population(
    seq: &PulseSequence,
    quad: &QuadratureRule,
    dec: &DecoherenceModel,
) -> Result<f64, SequenceError> {
    let trace = run_experiment(seq, quad, dec, &BlochVector::GROUND)?;
    Ok(trace.last().map(|s| s.population_p4).unwrap_or(f64::NAN))
}

/// Ramsey fringe protocol, scanned over the drive detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct RamseyProtocol {
    pub rabi_frequency: f64,
    pub free_time: f64,
    pub kicks: Vec<KickPlacement>,
}

impl RamseyProtocol {
    pub fn sequence(&self, detuning: f64) -> Result<PulseSequence, SequenceError> {
        build_ramsey(self.rabi_frequency, self.free_time, detuning, &self.kicks)
    }

    /// `(detuning, p4)` for every detuning, starting from `|3>`.
    pub fn scan(
        &self,
        detunings: &[f64],
        quad: &QuadratureRule,
        dec: &DecoherenceModel,
    ) -> Result<Vec<(f64, f64)>, SequenceError> {
        detunings
            .iter()
            .map(|&d| Ok((d, final_population(&self.sequence(d)?, quad, dec)?)))
            .collect()
    }
}

/// Spin-echo protocol, scanned over the readout time offset.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoProtocol {
    pub rabi_frequency: f64,
    pub half_time: f64,
    pub detuning: f64,
    pub kicks_before: Vec<KickPlacement>,
    pub kicks_after: Vec<KickPlacement>,
}

impl EchoProtocol {
    pub fn sequence(&self, readout_offset: f64) -> Result<PulseSequence, SequenceError> {
        build_echo(
            self.rabi_frequency,
            self.half_time,
            self.detuning,
            &self.kicks_before,
            &self.kicks_after,
            readout_offset,
        )
    }

    /// `(readout_offset, p4)` for every offset, starting from `|3>`.
    pub fn scan(
        &self,
        offsets: &[f64],
        quad: &QuadratureRule,
        dec: &DecoherenceModel,
    ) -> Result<Vec<(f64, f64)>, SequenceError> {
        offsets
            .iter()
            .map(|&o| Ok((o, final_population(&self.sequence(o)?, quad, dec)?)))
            .collect()
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}
