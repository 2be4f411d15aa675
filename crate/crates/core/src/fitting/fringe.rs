use std::f64::consts::{PI, TAU};

use super::{dominant_frequency, lm, rms, sinusoid_at, wrap_phase, FitError};

const MIN_SAMPLES: usize = 8;
const MIN_PERIODS: f64 = 2.0;
const MAX_EVALUATIONS: usize = 2000;

/// `offset + amplitude * cos(angular_frequency * x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    pub amplitude: f64,
    /// rad, in `(-pi, pi]`
    pub phase: f64,
    pub offset: f64,
    /// rad per unit of the scan variable
    pub angular_frequency: f64,
    pub residual_rms: f64,
}

impl FringeFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (self.angular_frequency * x + self.phase).cos()
    }

    pub fn period(&self) -> f64 {
        TAU / self.angular_frequency
    }
}

/// Phase and contrast of a scan relative to a reference scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeComparison {
    /// Fringe displacement over period, times 2π; in `(-pi, pi]`.
    pub phase_shift: f64,
    pub amplitude_ratio: f64,
    /// Fringe period in units of the scan variable.
    pub period: f64,
    pub reference: FringeFit,
    pub scan: FringeFit,
}

fn split(points: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>, f64), FitError> {
    if points.len() < MIN_SAMPLES {
        return Err(FitError::InsufficientData {
            needed: MIN_SAMPLES,
            got: points.len(),
        });
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(FitError::DegenerateTrace);
    }
    let x_lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((xs, ys, x_hi - x_lo))
}

fn check_coverage(w: f64, span: f64) -> Result<(), FitError> {
    let periods = w.abs() * span / TAU;
    if periods + 1e-9 < MIN_PERIODS {
        Err(FitError::InsufficientCoverage {
            periods,
            needed: MIN_PERIODS,
        })
    } else {
        Ok(())
    }
}

fn from_linear(a: f64, b: f64, c: f64, w: f64, residual_rms: f64) -> FringeFit {
    FringeFit {
        amplitude: a.hypot(b),
        phase: wrap_phase((-b).atan2(a)),
        offset: c,
        angular_frequency: w,
        residual_rms,
    }
}

/// Fits a sinusoidal fringe to `(x, y)` points.
///
/// With `angular_frequency` given the fit is linear at that frequency;
/// otherwise the frequency is located by a sinusoid scan and refined jointly
/// with the quadratures.
pub fn fit_fringe(points: &[(f64, f64)], angular_frequency: Option<f64>) -> Result<FringeFit, FitError> {
    let (xs, ys, span) = split(points)?;
    if span.is_nan() || span <= 0.0 {
        return Err(FitError::InsufficientCoverage {
            periods: 0.0,
            needed: MIN_PERIODS,
        });
    }
    let n = xs.len() as f64;

    if let Some(w) = angular_frequency {
        if !w.is_finite() || w <= 0.0 {
            return Err(FitError::InvalidInit("fringe frequency must be positive and finite"));
        }
        check_coverage(w, span)?;
        let (a, b, c, rss) = sinusoid_at(&xs, &ys, w).ok_or(FitError::NonFinite)?;
        return Ok(from_linear(a, b, c, w, (rss / n).sqrt()));
    }

    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let dx_min = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let w_lo = MIN_PERIODS * TAU / span;
    let w_hi = PI / dx_min;
    if w_hi <= w_lo {
        return Err(FitError::InsufficientCoverage {
            periods: w_hi * span / TAU,
            needed: MIN_PERIODS,
        });
    }
    let grid = (16.0 * (w_hi - w_lo) * span / TAU).clamp(64.0, 20_000.0) as usize;
    let w0 = dominant_frequency(&xs, &ys, w_lo, w_hi, grid).ok_or(FitError::DegenerateTrace)?;
    let (a0, b0, c0, _) = sinusoid_at(&xs, &ys, w0).ok_or(FitError::NonFinite)?;

    let residual_fn = |p: &[f64]| -> Option<Vec<f64>> {
        Some(
            xs.iter()
                .zip(&ys)
                .map(|(&x, &y)| p[2] + p[0] * (p[3] * x).cos() + p[1] * (p[3] * x).sin() - y)
                .collect(),
        )
    };
    let amp = a0.hypot(b0).max(1e-12);
    let typical = [amp, amp, c0.abs().max(amp), w0];
    let scale = 0.5 * ys.iter().map(|y| y * y).sum::<f64>();
    let out = lm::minimize(&residual_fn, &[a0, b0, c0, w0], &typical, scale, MAX_EVALUATIONS)
        .ok_or(FitError::NonFinite)?;
    let w = out.x[3].abs();
    check_coverage(w, span)?;
    // Re-solve the linear part at the refined frequency.
    let (a, b, c, rss) = sinusoid_at(&xs, &ys, w).ok_or(FitError::NonFinite)?;
    if !out.converged {
        log::debug!("fringe frequency refinement stopped early; rms {:.3e}", rms(out.residuals.as_slice()));
    }
    Ok(from_linear(a, b, c, w, (rss / n).sqrt()))
}

/// Phase shift and normalized amplitude of `scan` relative to `reference`.
///
/// The fringe frequency is taken from the reference and imposed on the scan.
pub fn extract_ramsey_fringe(
    scan: &[(f64, f64)],
    reference: &[(f64, f64)],
) -> Result<FringeComparison, FitError> {
    let reference_fit = fit_fringe(reference, None)?;
    let scan_fit = fit_fringe(scan, Some(reference_fit.angular_frequency))?;
    Ok(FringeComparison {
        phase_shift: wrap_phase(scan_fit.phase - reference_fit.phase),
        amplitude_ratio: scan_fit.amplitude / reference_fit.amplitude,
        period: reference_fit.period(),
        reference: reference_fit,
        scan: scan_fit,
    })
}

/// Continuous phase track: each value is moved onto the 2π branch nearest to
/// its predecessor.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    for &p in phases {
        let next = match out.last() {
            None => p,
            Some(&prev) => prev + wrap_phase(p - prev),
        };
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inhomogeneous::QuadratureRule;
    use crate::probe::DecoherenceModel;
    use crate::sequence::{linspace, KickPlacement, RamseyProtocol};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_3;

    const FREE_TIME: f64 = 300e-6;

    fn sinusoid(xs: &[f64], amp: f64, w: f64, phase: f64, offset: f64) -> Vec<(f64, f64)> {
        xs.iter().map(|&x| (x, offset + amp * (w * x + phase).cos())).collect()
    }

    fn ramsey_scan(kick: f64) -> Vec<(f64, f64)> {
        let proto = RamseyProtocol {
            rabi_frequency: TAU * 20e3,
            free_time: FREE_TIME,
            kicks: vec![KickPlacement::new(0.5 * FREE_TIME, kick)],
        };
        let dets = linspace(-10e3, 10e3, 81);
        proto
            .scan(&dets, &QuadratureRule::homogeneous(1.0), &DecoherenceModel::NONE)
            .unwrap()
    }

    #[test]
    fn identical_scans() {
        let reference = ramsey_scan(0.0);
        let c = extract_ramsey_fringe(&reference, &reference).unwrap();
        assert!(c.phase_shift.abs() < 1e-12);
        assert!((c.amplitude_ratio - 1.0).abs() < 1e-12);
        assert!((c.period - 1.0 / FREE_TIME).abs() < 1e-6 / FREE_TIME);
    }

    #[test]
    fn homogeneous_kick_translates_fringe() {
        let c = extract_ramsey_fringe(&ramsey_scan(FRAC_PI_3), &ramsey_scan(0.0)).unwrap();
        assert!((c.phase_shift - FRAC_PI_3).abs() < 1e-6, "{}", c.phase_shift);
        assert!((c.amplitude_ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_frequency_without_hint() {
        let xs = linspace(0.0, 5.0, 200);
        let fit = fit_fringe(&sinusoid(&xs, 0.3, 7.3, -2.0, 0.4), None).unwrap();
        assert!((fit.angular_frequency - 7.3).abs() < 1e-8);
        assert!((fit.phase + 2.0).abs() < 1e-8);
        assert!((fit.amplitude - 0.3).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn rejects_short_coverage() {
        let xs = linspace(0.0, 1.0, 50);
        let pts = sinusoid(&xs, 0.5, TAU * 1.5, 0.0, 0.5);
        assert!(matches!(fit_fringe(&pts, None), Err(FitError::InsufficientCoverage { .. })));
        assert!(matches!(
            fit_fringe(&pts, Some(TAU * 1.5)),
            Err(FitError::InsufficientCoverage { .. })
        ));
    }

    #[test]
    fn flat_scan_is_degenerate() {
        let pts: Vec<(f64, f64)> = linspace(0.0, 10.0, 30).into_iter().map(|x| (x, 0.5)).collect();
        assert_eq!(fit_fringe(&pts, None), Err(FitError::DegenerateTrace));
    }

    #[test]
    fn unwrap_follows_nearest_branch() {
        let truth: Vec<f64> = (0..40).map(|i| 0.3 * i as f64 - 1.0).collect();
        let wrapped: Vec<f64> = truth.iter().map(|&p| wrap_phase(p)).collect();
        for (u, t) in unwrap_phases(&wrapped).iter().zip(&truth) {
            assert!((u - t).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn phase_is_equivariant(
            phase in -PI..PI,
            delta in -PI..PI,
            amp in 0.05f64..0.5,
            w in 4.0f64..12.0,
        ) {
            let xs = linspace(-2.0, 2.0, 120);
            let reference = sinusoid(&xs, 0.5, w, 0.1, 0.5);
            let a = sinusoid(&xs, amp, w, phase, 0.5);
            let b = sinusoid(&xs, amp, w, phase + delta, 0.5);
            let pa = extract_ramsey_fringe(&a, &reference).unwrap().phase_shift;
            let pb = extract_ramsey_fringe(&b, &reference).unwrap().phase_shift;
            prop_assert!(wrap_phase(pb - pa - delta).abs() < 1e-8);
        }
    }
}
