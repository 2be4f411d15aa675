use std::f64::consts::TAU;

use super::{dominant_frequency, lm, rms, sinusoid_at, wrap_phase, FitError, FitResult};
use crate::sequence::TraceSample;

const MIN_SAMPLES: usize = 8;
const MAX_EVALUATIONS: usize = 4000;

/// `amplitude * exp(-t / decay_time) * cos(frequency * t + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedCosineParams {
    pub amplitude: f64,
    /// s; `f64::INFINITY` for an undamped oscillation.
    pub decay_time: f64,
    /// rad/s
    pub frequency: f64,
    /// rad
    pub phase: f64,
    pub offset: f64,
}

impl DampedCosineParams {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.decay_time).exp() * (self.frequency * t + self.phase).cos() + self.offset
    }

    fn decay_rate(&self) -> f64 {
        if self.decay_time.is_infinite() {
            0.0
        } else {
            1.0 / self.decay_time
        }
    }
}

fn model(x: &[f64], t: f64) -> f64 {
    x[0] * (-x[1] * t).exp() * (x[2] * t + x[3]).cos() + x[4]
}

fn check_trace(trace: &[TraceSample]) -> Result<(f64, f64), FitError> {
    if trace.len() < MIN_SAMPLES {
        return Err(FitError::InsufficientData {
            needed: MIN_SAMPLES,
            got: trace.len(),
        });
    }
    let (lo, hi) = trace
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.population_p4), hi.max(s.population_p4))
        });
    if !(hi - lo).is_finite() || hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(FitError::DegenerateTrace);
    }
    let t0 = trace.first().map(|s| s.time).unwrap_or(0.0);
    let t1 = trace.last().map(|s| s.time).unwrap_or(0.0);
    Ok((hi - lo, t1 - t0))
}

/// Starting values from the data alone: offset and amplitude from the range,
/// frequency from a sinusoid scan, decay time equal to the trace span.
pub fn guess_damped_cosine(trace: &[TraceSample]) -> Result<DampedCosineParams, FitError> {
    let (range, span) = check_trace(trace)?;
    let ts: Vec<f64> = trace.iter().map(|s| s.time).collect();
    let ys: Vec<f64> = trace.iter().map(|s| s.population_p4).collect();
    let dt_min = ts
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let w_hi = std::f64::consts::PI / dt_min;
    let w_lo = TAU / span;
    let grid = ((w_hi / w_lo) * 8.0).clamp(64.0, 20_000.0) as usize;
    let w = dominant_frequency(&ts, &ys, w_lo, w_hi, grid).ok_or(FitError::DegenerateTrace)?;
    let (a, b, c, _) = sinusoid_at(&ts, &ys, w).ok_or(FitError::DegenerateTrace)?;
    Ok(DampedCosineParams {
        amplitude: a.hypot(b).max(0.5 * range * 0.1),
        decay_time: span,
        frequency: w,
        phase: (-b).atan2(a),
        offset: c,
    })
}

/// Least-squares fit of a damped cosine. Non-convergence is reported through
/// `converged`, not as an error.
pub fn fit_damped_cosine(
    trace: &[TraceSample],
    init: DampedCosineParams,
) -> Result<FitResult<DampedCosineParams>, FitError> {
    let (range, span) = check_trace(trace)?;
    if init.decay_time.is_nan() || init.decay_time <= 0.0 || !init.frequency.is_finite() || !init.amplitude.is_finite() {
        return Err(FitError::InvalidInit("decay time must be positive, frequency and amplitude finite"));
    }
    let periods = init.frequency.abs() * span / TAU;
    if periods < 1.0 {
        return Err(FitError::InsufficientCoverage { periods, needed: 1.0 });
    }

    let residual_fn = |x: &[f64]| -> Option<Vec<f64>> {
        Some(trace.iter().map(|s| model(x, s.time) - s.population_p4).collect())
    };
    let x0 = [init.amplitude, init.decay_rate(), init.frequency, init.phase, init.offset];
    let typical = [
        init.amplitude.abs().max(0.5 * range),
        init.decay_rate().max(1.0 / span),
        init.frequency.abs().max(TAU / span),
        1.0,
        init.offset.abs().max(range),
    ];
    let scale = 0.5 * trace.iter().map(|s| s.population_p4 * s.population_p4).sum::<f64>();
    let out = lm::minimize(&residual_fn, &x0, &typical, scale, MAX_EVALUATIONS).ok_or(FitError::NonFinite)?;

    let x = &out.x;
    let (mut amplitude, mut phase) = (x[0], x[3]);
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += std::f64::consts::PI;
    }
    let rate = x[1];
    if rate < 0.0 {
        log::warn!("damped cosine fit returned a growing envelope (rate {rate:.3e} 1/s)");
    }
    let params = DampedCosineParams {
        amplitude,
        decay_time: if rate > 0.0 { 1.0 / rate } else { f64::INFINITY },
        frequency: x[2],
        phase: wrap_phase(phase),
        offset: x[4],
    };
    Ok(FitResult {
        params,
        parameter_names: vec!["amplitude", "decay_rate", "frequency", "phase", "offset"],
        covariance: super::covariance(&out.jacobian, &out.residuals),
        residual_rms: rms(out.residuals.as_slice()),
        n_iterations: out.evaluations,
        converged: out.converged && rate >= 0.0,
        gradient_norm: out.gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(p: &DampedCosineParams, n: usize, dt: f64) -> Vec<TraceSample> {
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                TraceSample {
                    time: t,
                    population_p4: p.eval(t),
                }
            })
            .collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let truth = DampedCosineParams {
            amplitude: 0.45,
            decay_time: 3.0e-3,
            frequency: TAU * 4.0e3,
            phase: 2.9,
            offset: 0.5,
        };
        let trace = synth(&truth, 500, 10.3e-6);
        let init = DampedCosineParams {
            amplitude: 0.4,
            decay_time: 2.0e-3,
            frequency: TAU * 3.97e3,
            phase: 2.5,
            offset: 0.45,
        };
        let fit = fit_damped_cosine(&trace, init).unwrap();
        let p = fit.params;
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(fit.converged);
        assert!(rel(p.amplitude, truth.amplitude) < 1e-6);
        assert!(rel(p.decay_time, truth.decay_time) < 1e-6);
        assert!(rel(p.frequency, truth.frequency) < 1e-6);
        assert!(rel(p.phase, truth.phase) < 1e-6);
        assert!(rel(p.offset, truth.offset) < 1e-6);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn guess_then_fit() {
        let truth = DampedCosineParams {
            amplitude: 0.5,
            decay_time: 1.5e-3,
            frequency: TAU * 2.5e3,
            phase: -std::f64::consts::PI,
            offset: 0.5,
        };
        let trace = synth(&truth, 400, 7e-6);
        let guess = guess_damped_cosine(&trace).unwrap();
        assert!((guess.frequency / truth.frequency - 1.0).abs() < 0.05);
        let fit = fit_damped_cosine(&trace, guess).unwrap();
        assert!((fit.params.decay_time / truth.decay_time - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_and_short_traces() {
        let flat: Vec<TraceSample> = (0..20)
            .map(|i| TraceSample {
                time: i as f64,
                population_p4: 0.5,
            })
            .collect();
        let init = DampedCosineParams {
            amplitude: 0.1,
            decay_time: 1.0,
            frequency: 1.0,
            phase: 0.0,
            offset: 0.5,
        };
        assert_eq!(fit_damped_cosine(&flat, init), Err(FitError::DegenerateTrace));
        assert!(matches!(
            fit_damped_cosine(&flat[..4], init),
            Err(FitError::InsufficientData { .. })
        ));
    }

    #[test]
    fn needs_a_full_period() {
        let truth = DampedCosineParams {
            amplitude: 0.5,
            decay_time: 1.0,
            frequency: 1.0,
            phase: 0.0,
            offset: 0.5,
        };
        let trace = synth(&truth, 20, 0.1);
        assert!(matches!(
            fit_damped_cosine(&trace, truth),
            Err(FitError::InsufficientCoverage { .. })
        ));
    }
}
