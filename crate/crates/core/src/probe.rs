//! Dispersive probe: phase-shift observable, photon-number calibration of the
//! light-shift kick, and a phenomenological decoherence model.

use crate::bloch::BlochVector;

/// Optical parameters entering the dispersive phase shift.
///
/// Detuning and linewidth share a unit (Hz); only their ratio matters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOpticalParams {
    /// Probe detuning from the `F=4 -> F'=5` line, signed.
    pub detuning: f64,
    /// Natural linewidth `gamma` of the probed transition.
    pub linewidth: f64,
    /// Probe wavelength, m.
    pub wavelength: f64,
    /// Sample length along the probe, m.
    pub sample_length: f64,
    /// Sample volume, m³.
    pub sample_volume: f64,
}

impl ProbeOpticalParams {
    /// Cs D2 linewidth, Hz.
    pub const CS_D2_LINEWIDTH_HZ: f64 = 5.234e6;
    /// Cs D2 wavelength, m.
    pub const CS_D2_WAVELENGTH_M: f64 = 852.347e-9;

    /// Cs D2 probe through a cylindrical sample of radius 15 µm and length
    /// 0.5 mm. With `1e5` atoms at +160 MHz this gives about 0.22 rad.
    pub fn cesium_d2(detuning_hz: f64) -> Self {
        let radius = 15e-6;
        let length = 0.5e-3;
        Self {
            detuning: detuning_hz,
            linewidth: Self::CS_D2_LINEWIDTH_HZ,
            wavelength: Self::CS_D2_WAVELENGTH_M,
            sample_length: length,
            sample_volume: std::f64::consts::PI * radius * radius * length,
        }
    }

    pub fn is_valid(&self) -> bool {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        self.detuning.is_finite()
            && pos(self.linewidth)
            && pos(self.wavelength)
            && pos(self.sample_length)
            && pos(self.sample_volume)
    }

    /// `phi0 = 3 l lambda² / (pi V)`.
    pub fn resonant_phase_scale(&self) -> f64 {
        3.0 * self.sample_length * self.wavelength * self.wavelength
            / (std::f64::consts::PI * self.sample_volume)
    }

    /// `(gamma/2) Delta / (Delta² + (gamma/2)²)`; odd in `Delta`, extremal at
    /// `|Delta| = gamma/2` where it equals `±1/2`.
    pub fn dispersive_factor(&self) -> f64 {
        let half = 0.5 * self.linewidth;
        half * self.detuning / (self.detuning * self.detuning + half * half)
    }
}

/// Probe phase shift (rad) from `n_atoms_in_4` atoms in the upper clock state.
pub fn phase_shift(params: &ProbeOpticalParams, n_atoms_in_4: f64) -> f64 {
    5.0 / 36.0 * params.resonant_phase_scale() * n_atoms_in_4 * params.dispersive_factor()
}

/// Maps probe photon number to the peak per-pulse light-shift phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeCalibration {
    /// Peak accumulated phase `chi0 * t_pulse` per photon, rad.
    pub chi_per_photon: f64,
    pub scatter_prob_per_pulse: f64,
    /// s
    pub pulse_duration: f64,
}

impl ProbeCalibration {
    pub fn new(chi_per_photon: f64) -> Self {
        Self {
            chi_per_photon,
            scatter_prob_per_pulse: 0.0,
            pulse_duration: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.chi_per_photon.is_finite()
            && self.chi_per_photon >= 0.0
            && (0.0..=1.0).contains(&self.scatter_prob_per_pulse)
            && self.pulse_duration.is_finite()
            && self.pulse_duration >= 0.0
    }
}

/// Peak per-pulse phase `chi0 * t` for a pulse of `n_photons`.
pub fn chi_max_from_photons(n_photons: f64, cal: &ProbeCalibration) -> f64 {
    cal.chi_per_photon * n_photons
}

/// Homogeneous dephasing plus per-pulse loss out of the two-level manifold.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecoherenceModel {
    /// Exponential damping rate of `s1`, `s2`, 1/s.
    pub homogeneous_decay_rate: f64,
    /// Fractional shrink of the whole vector per probe pulse.
    pub population_loss_per_pulse: f64,
}

impl DecoherenceModel {
    pub const NONE: Self = Self {
        homogeneous_decay_rate: 0.0,
        population_loss_per_pulse: 0.0,
    };

    pub fn new(homogeneous_decay_rate: f64, population_loss_per_pulse: f64) -> Self {
        Self {
            homogeneous_decay_rate,
            population_loss_per_pulse,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.homogeneous_decay_rate == 0.0 && self.population_loss_per_pulse == 0.0
    }

    pub fn is_valid(&self) -> bool {
        self.homogeneous_decay_rate.is_finite()
            && self.homogeneous_decay_rate >= 0.0
            && (0.0..=1.0).contains(&self.population_loss_per_pulse)
    }
}

/// Damps the transverse components over `dt` and shrinks the whole vector by
/// `(1 - loss)^n_probe_pulses`. Never increases the norm.
pub fn apply_decoherence(
    s: &BlochVector,
    model: &DecoherenceModel,
    dt: f64,
    n_probe_pulses: u32,
) -> BlochVector {
    if model.is_zero() {
        return *s;
    }
    let survive = (1.0 - model.population_loss_per_pulse).powi(n_probe_pulses as i32);
    let transverse = (-model.homogeneous_decay_rate * dt).exp() * survive;
    BlochVector::new(s.s1 * transverse, s.s2 * transverse, s.s3 * survive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dispersive_extremum_at_half_linewidth() {
        let mut p = ProbeOpticalParams::cesium_d2(0.0);
        p.detuning = 0.5 * p.linewidth;
        let peak = phase_shift(&p, 1e5);
        let expected = 5.0 / 36.0 * p.resonant_phase_scale() * 1e5 * 0.5;
        assert!((peak - expected).abs() < 1e-12 * expected.abs());

        // scan: nothing exceeds the value at gamma/2
        let gamma = p.linewidth;
        let mut best = (0.0, f64::MIN);
        for i in 1..4000 {
            p.detuning = i as f64 * gamma / 1000.0;
            let v = phase_shift(&p, 1e5);
            if v > best.1 {
                best = (p.detuning, v);
            }
        }
        assert!((best.0 - 0.5 * gamma).abs() <= gamma / 1000.0);
    }

    #[test]
    fn odd_in_detuning() {
        for &d in &[1e6, 3.3e6, 160e6, -42e6] {
            let plus = phase_shift(&ProbeOpticalParams::cesium_d2(d), 1e5);
            let minus = phase_shift(&ProbeOpticalParams::cesium_d2(-d), 1e5);
            assert_eq!(plus, -minus);
        }
    }

    #[test]
    fn operating_point_magnitude() {
        let p = ProbeOpticalParams::cesium_d2(160e6);
        assert!(p.is_valid());
        let v = phase_shift(&p, 1e5);
        assert!((0.1..=0.5).contains(&v), "{v}");
    }

    #[test]
    fn photons_scale_linearly() {
        let cal = ProbeCalibration::new(2e-6);
        assert_eq!(chi_max_from_photons(0.0, &cal), 0.0);
        let a = chi_max_from_photons(1.5e5, &cal);
        assert_eq!(chi_max_from_photons(3.0e5, &cal), 2.0 * a);
    }

    #[test]
    fn decoherence_examples() {
        let s = BlochVector::new(0.6, 0.0, 0.8);
        assert_eq!(apply_decoherence(&s, &DecoherenceModel::NONE, 1.0, 5), s);

        let m = DecoherenceModel::new(std::f64::consts::LN_2, 0.0);
        let out = apply_decoherence(&BlochVector::new(0.4, -0.2, 0.5), &m, 1.0, 0);
        assert!((out.s1 - 0.2).abs() < 1e-15);
        assert!((out.s2 + 0.1).abs() < 1e-15);
        assert_eq!(out.s3, 0.5);
    }

    proptest! {
        #[test]
        fn decoherence_never_grows(rate in 0.0..1e4f64, loss in 0.0..1.0f64, dt in 0.0..1e-2f64,
                                   n in 0u32..10, s1 in -1.0..1.0f64, s2 in -1.0..1.0f64, s3 in -1.0..1.0f64) {
            let s = BlochVector::new(s1, s2, s3);
            let out = apply_decoherence(&s, &DecoherenceModel::new(rate, loss), dt, n);
            prop_assert!(out.norm() <= s.norm() + 1e-15);
        }

        #[test]
        fn photon_map_is_homogeneous(c in 0.0..1e-5f64, n in 0.0..1e7f64, a in 0.0..10.0f64) {
            let cal = ProbeCalibration::new(c);
            let lhs = chi_max_from_photons(a * n, &cal);
            let rhs = a * chi_max_from_photons(n, &cal);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }
    }
}
