//! Light-shift distribution of a Gaussian probe over a Gaussian sample.
//!
//! With column density `n0 exp(-2r²/r0²)` and probe intensity
//! `I0 exp(-2r²/w0²)`, the shift scales with intensity,
//! `chi(r) = chi0 exp(-2r²/w0²)`. The change of variables `r -> chi` turns the
//! detection integral `∫ f(chi(r)) n(r) I(r) r dr` into `∫₀^chi0 f(chi) chi^(k²) dchi`
//! with `k = w0 / r0`. Ensemble averages are evaluated with a Gauss rule built
//! for that weight.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::bloch::{BlochVector, Rotation3};

/// Number of quadrature nodes used unless a caller asks otherwise.
pub const DEFAULT_NODES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("sample radius and beam waist must be positive and finite (r0 = {r0}, w0 = {w0})")]
    Geometry { r0: f64, w0: f64 },
    #[error("peak light shift must be finite and non-negative, got {0}")]
    ChiMax(f64),
    #[error("size ratio k must be finite and non-negative, got {0}")]
    KRatio(f64),
    #[error("light shift {chi} outside the distribution support [0, {chi_max}]")]
    Domain { chi: f64, chi_max: f64 },
    #[error("a quadrature rule needs at least 2 nodes, got {0}")]
    NodeCount(usize),
    #[error("quadrature nodes and weights must be non-empty, finite, of equal length, with positive weights")]
    InvalidRule,
}

/// Radial profiles of the atomic sample and the probe beam (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGeometry {
    pub sample_radius: f64,
    pub beam_waist: f64,
    /// Only scales absolute signals.
    pub peak_column_density: f64,
    /// Only scales absolute signals.
    pub peak_intensity: f64,
}

impl SampleGeometry {
    pub fn new(sample_radius: f64, beam_waist: f64) -> Result<Self, DistributionError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(sample_radius) || !ok(beam_waist) {
            return Err(DistributionError::Geometry {
                r0: sample_radius,
                w0: beam_waist,
            });
        }
        Ok(Self {
            sample_radius,
            beam_waist,
            peak_column_density: 1.0,
            peak_intensity: 1.0,
        })
    }

    /// `k = w0 / r0`.
    pub fn k_ratio(&self) -> f64 {
        self.beam_waist / self.sample_radius
    }

    pub fn column_density(&self, r: f64) -> f64 {
        self.peak_column_density * (-2.0 * r * r / (self.sample_radius * self.sample_radius)).exp()
    }

    pub fn intensity(&self, r: f64) -> f64 {
        self.peak_intensity * (-2.0 * r * r / (self.beam_waist * self.beam_waist)).exp()
    }
}

/// Light shift felt by atoms at radius `r`: `chi0 exp(-2r²/w0²)`.
pub fn chi_of_radius(r: f64, geom: &SampleGeometry, chi_max: f64) -> f64 {
    chi_max * (-2.0 * r * r / (geom.beam_waist * geom.beam_waist)).exp()
}

/// Shifts spread over `[0, chi_max]` with density proportional to `chi^(k²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightShiftDistribution {
    chi_max: f64,
    k_ratio: f64,
}

impl LightShiftDistribution {
    pub fn new(chi_max: f64, k_ratio: f64) -> Result<Self, DistributionError> {
        if !(chi_max.is_finite() && chi_max >= 0.0) {
            return Err(DistributionError::ChiMax(chi_max));
        }
        if !(k_ratio.is_finite() && k_ratio >= 0.0) {
            return Err(DistributionError::KRatio(k_ratio));
        }
        Ok(Self { chi_max, k_ratio })
    }

    pub fn from_geometry(geom: &SampleGeometry, chi_max: f64) -> Result<Self, DistributionError> {
        Self::new(chi_max, geom.k_ratio())
    }

    pub fn chi_max(&self) -> f64 {
        self.chi_max
    }

    pub fn k_ratio(&self) -> f64 {
        self.k_ratio
    }

    /// Exponent of the weight, `k²`.
    pub fn weight_exponent(&self) -> f64 {
        self.k_ratio * self.k_ratio
    }

    /// `∫₀^chi0 chi^(k²) dchi = chi0^(k²+1) / (k²+1)`.
    pub fn normalization(&self) -> f64 {
        let e = self.weight_exponent() + 1.0;
        self.chi_max.powf(e) / e
    }

    /// Weight at `chi`, normalized to 1 at `chi_max`.
    pub fn weight_density(&self, chi: f64) -> Result<f64, DistributionError> {
        if !(0.0..=self.chi_max).contains(&chi) {
            return Err(DistributionError::Domain {
                chi,
                chi_max: self.chi_max,
            });
        }
        if self.chi_max == 0.0 {
            return Ok(1.0);
        }
        Ok((chi / self.chi_max).powf(self.weight_exponent()))
    }
}

pub fn weight_density(chi: f64, dist: &LightShiftDistribution) -> Result<f64, DistributionError> {
    dist.weight_density(chi)
}

/// Discrete light-shift classes with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    chi_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    weight_sum: f64,
}

impl QuadratureRule {
    /// Builds a rule from explicit nodes (shift values) and positive weights.
    /// Weights are rescaled to sum to one; `chi_max` is the largest node.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        let valid = !nodes.is_empty()
            && nodes.len() == weights.len()
            && nodes.iter().all(|x| x.is_finite() && *x >= 0.0)
            && weights.iter().all(|w| w.is_finite() && *w > 0.0);
        if !valid {
            return Err(DistributionError::InvalidRule);
        }
        let chi_max = nodes.iter().copied().fold(0.0, f64::max);
        Ok(Self::from_parts(chi_max, nodes, weights))
    }

    /// A single class at `chi`: the homogeneous case.
    pub fn homogeneous(chi: f64) -> Self {
        Self::from_parts(chi, vec![chi], vec![1.0])
    }

    fn from_parts(chi_max: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let weight_sum = weights.iter().sum();
        Self {
            chi_max,
            nodes,
            weights,
            weight_sum,
        }
    }

    pub fn chi_max(&self) -> f64 {
        self.chi_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node positions relative to the peak, `chi_i / chi_max`; all zero when
    /// the peak shift is zero.
    pub fn scales(&self) -> Vec<f64> {
        if self.chi_max == 0.0 {
            return vec![0.0; self.nodes.len()];
        }
        self.nodes.iter().map(|c| c / self.chi_max).collect()
    }

    /// Weighted average of `f` over the classes, summed in node order.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let acc: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&chi, &w)| w * f(chi))
            .sum();
        acc / self.weight_sum
    }

    /// Weighted average of per-node values given in node order.
    pub fn average(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        let acc: f64 = values.iter().zip(&self.weights).map(|(v, w)| w * v).sum();
        acc / self.weight_sum
    }

    /// Weighted 3-projection of `transfer(chi) * s0` over the distribution.
    pub fn ensemble_signal<T: FnMut(f64) -> Rotation3>(&self, s0: &BlochVector, mut transfer: T) -> f64 {
        self.integrate(|chi| transfer(chi).apply(s0).s3)
    }
}

/// Gauss rule for the weight `chi^(k²)` on `[0, chi_max]`, exact for
/// polynomials of degree up to `2 n_nodes - 1`.
pub fn build_quadrature(
    dist: &LightShiftDistribution,
    n_nodes: usize,
) -> Result<QuadratureRule, DistributionError> {
    if n_nodes < 2 {
        return Err(DistributionError::NodeCount(n_nodes));
    }
    let (unit_nodes, weights) = gauss_jacobi_unit(n_nodes, dist.weight_exponent());
    let nodes = unit_nodes.iter().map(|u| u * dist.chi_max).collect();
    Ok(QuadratureRule::from_parts(dist.chi_max, nodes, weights))
}

/// Golub–Welsch on the Jacobi recurrence with `alpha = 0`, `beta`, mapped from
/// `[-1, 1]` to `[0, 1]`. Weights are returned unnormalized-but-proportional;
/// nodes ascend.
fn gauss_jacobi_unit(n: usize, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let alpha = 0.0;
    let ab = alpha + beta;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let diag = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            let s = 2.0 * k + ab;
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        jacobi[(i, i)] = diag;
        if i + 1 < n {
            let m = k + 1.0;
            let s = 2.0 * m + ab;
            let b = 4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0));
            let off = b.sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let eigen = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = eigen
        .eigenvalues
        .iter()
        .zip(eigen.eigenvectors.row(0).iter())
        .map(|(&x, &v)| (0.5 * (1.0 + x), v * v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Weighted detected 3-projection; see [`QuadratureRule::ensemble_signal`].
pub fn ensemble_signal<T: FnMut(f64) -> Rotation3>(
    transfer: T,
    s0: &BlochVector,
    quad: &QuadratureRule,
) -> f64 {
    quad.ensemble_signal(s0, transfer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Normalized average of `f(u)` under `u^beta` on `[0, 1]`, by the
    /// substitution `v = u^(beta+1)` and a composite trapezoid rule.
    fn trapezoid_average<F: Fn(f64) -> f64>(beta: f64, panels: usize, f: F) -> f64 {
        let p = 1.0 / (beta + 1.0);
        let h = 1.0 / panels as f64;
        let mut acc = 0.5 * (f(0.0) + f(1.0));
        for i in 1..panels {
            acc += f((i as f64 * h).powf(p));
        }
        acc * h
    }

    #[test]
    fn weight_density_examples() {
        let d = LightShiftDistribution::new(2.0, 1.7).unwrap();
        assert_eq!(d.weight_density(2.0).unwrap(), 1.0);
        let d = LightShiftDistribution::new(2.0, 1.0).unwrap();
        assert!((d.weight_density(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(d.weight_density(2.5), Err(DistributionError::Domain { .. })));
        assert!(d.weight_density(-0.1).is_err());
    }

    #[test]
    fn weight_shape_limits() {
        // wide beam: weight concentrated near chi0; narrow beam: nearly flat
        let wide = LightShiftDistribution::new(1.0, 3.0).unwrap();
        let narrow = LightShiftDistribution::new(1.0, 0.3).unwrap();
        assert!(wide.weight_density(0.8).unwrap() < 0.2);
        assert!(narrow.weight_density(0.1).unwrap() > 0.8);
        assert!(narrow.weight_density(0.5).unwrap() > 0.9);
    }

    #[test]
    fn normalization_constant() {
        let d = LightShiftDistribution::new(2.0, 0.5).unwrap();
        let expected = 2f64.powf(1.25) / 1.25;
        assert!((d.normalization() - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LightShiftDistribution::new(-1.0, 1.0).is_err());
        assert!(LightShiftDistribution::new(1.0, f64::NAN).is_err());
        assert!(SampleGeometry::new(0.0, 1.0).is_err());
        let d = LightShiftDistribution::new(1.0, 1.0).unwrap();
        assert_eq!(build_quadrature(&d, 1), Err(DistributionError::NodeCount(1)));
        assert!(QuadratureRule::new(vec![0.1], vec![0.0]).is_err());
        assert!(QuadratureRule::new(vec![0.1, 0.2], vec![1.0]).is_err());
    }

    #[test]
    fn flat_rule_is_exact_on_quadratics() {
        let chi0 = 1.7;
        let d = LightShiftDistribution::new(chi0, 0.0).unwrap();
        let q = build_quadrature(&d, 8).unwrap();
        let v = q.integrate(|c| c * c);
        assert!((v - chi0 * chi0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn moments_match_weight() {
        for &k in &[0.0, 0.35, 1.0, 3.0, 10.0] {
            let d = LightShiftDistribution::new(1.0, k).unwrap();
            let beta = k * k;
            for &n in &[2usize, 5, 64, 128] {
                let q = build_quadrature(&d, n).unwrap();
                assert!(q.nodes().windows(2).all(|w| w[0] < w[1]));
                assert!(q.nodes().iter().all(|&c| (0.0..=1.0).contains(&c)));
                for i in 0..=2 {
                    let got = q.integrate(|c| c.powi(i));
                    let want = (beta + 1.0) / (beta + 1.0 + i as f64);
                    assert!((got - want).abs() < 1e-10, "k={k} n={n} i={i}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn normalization_of_signal() {
        let d = LightShiftDistribution::new(0.3, 0.35).unwrap();
        let q = build_quadrature(&d, 64).unwrap();
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        let s = ensemble_signal(|_| Rotation3::IDENTITY, &BlochVector::EXCITED, &q);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn cosine_matches_trapezoid_oracle() {
        let chi0 = 2.0;
        let k: f64 = 0.35;
        let d = LightShiftDistribution::new(chi0, k).unwrap();
        let q = build_quadrature(&d, 64).unwrap();
        let got = q.integrate(f64::cos);
        let want = trapezoid_average(k * k, 1_000_000, |u| (chi0 * u).cos());
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    /// Ramsey-style readout of an equatorial class: the pre-rotation maps the
    /// equatorial component back onto axis 3.
    fn readout(phi: f64) -> Rotation3 {
        Rotation3::about_axis1(PI / 2.0) * Rotation3::about_axis3(phi)
    }

    const EQUATOR: BlochVector = BlochVector::new(0.0, -1.0, 0.0);

    #[test]
    fn readout_projects_cosine() {
        for &phi in &[0.0, 0.4, 2.0, -1.0] {
            let s3 = readout(phi).apply(&EQUATOR).s3;
            assert!((s3 - phi.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn coherence_decay_uniform_limit() {
        let d = LightShiftDistribution::new(1.0, 1e-3).unwrap();
        let q = build_quadrature(&d, 64).unwrap();
        for &phi in &[0.5, 1.0, PI, 2.0 * PI, 3.3, 4.0 * PI] {
            let s = ensemble_signal(|chi| readout(chi * phi), &EQUATOR, &q);
            assert!((s - phi.sin() / phi).abs() < 1e-6, "phi={phi}: {s}");
        }
        let flat = build_quadrature(&LightShiftDistribution::new(1.0, 0.0).unwrap(), 64).unwrap();
        let s = ensemble_signal(|chi| readout(chi * 2.0 * PI), &EQUATOR, &flat);
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn coherence_decay_matches_oracle() {
        let k: f64 = 0.35;
        let phi = 2.0 * PI;
        let d = LightShiftDistribution::new(1.0, k).unwrap();
        let q = build_quadrature(&d, 64).unwrap();
        let got = ensemble_signal(|chi| readout(chi * phi), &EQUATOR, &q);
        let want = trapezoid_average(k * k, 1_000_000, |u| (phi * u).cos());
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn homogeneous_limit() {
        let d = LightShiftDistribution::new(1.0, 10.0).unwrap();
        let q = build_quadrature(&d, 64).unwrap();
        let got = ensemble_signal(readout, &EQUATOR, &q);
        let single = readout(1.0).apply(&EQUATOR).s3;
        assert!((got - single).abs() < 0.01);
    }

    #[test]
    fn chi_of_radius_examples() {
        let g = SampleGeometry::new(20e-6, 7e-6).unwrap();
        assert_eq!(chi_of_radius(0.0, &g, 0.3), 0.3);
        let at_waist = chi_of_radius(7e-6, &g, 0.3);
        assert!((at_waist - 0.3 * (-2.0f64).exp()).abs() < 1e-15);
    }

    /// `∫ f(chi(r)) n(r) I(r) r dr / ∫ n I r dr` by brute-force trapezoid in r.
    fn radial_average<F: Fn(f64) -> f64>(g: &SampleGeometry, chi0: f64, f: F) -> f64 {
        let combined = (1.0 / (g.sample_radius.powi(-2) + g.beam_waist.powi(-2))).sqrt();
        let r_max = 8.0 * combined;
        let panels = 200_000;
        let h = r_max / panels as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=panels {
            let r = i as f64 * h;
            let w = if i == 0 || i == panels { 0.5 } else { 1.0 };
            let density = g.column_density(r) * g.intensity(r) * r * w;
            num += density * f(chi_of_radius(r, g, chi0));
            den += density;
        }
        num / den
    }

    #[test]
    fn radial_and_shift_representations_agree() {
        let g = SampleGeometry::new(20e-6, 7e-6).unwrap();
        let chi0 = 3.0;
        let d = LightShiftDistribution::from_geometry(&g, chi0).unwrap();
        let q = build_quadrature(&d, 64).unwrap();
        let f = |chi: f64| readout(chi).apply(&EQUATOR).s3;
        let via_shift = q.integrate(f);
        let via_radius = radial_average(&g, chi0, f);
        assert!((via_shift - via_radius).abs() < 1e-6);
    }

    #[test]
    fn doubling_nodes_converges() {
        let d = LightShiftDistribution::new(1.0, 0.35).unwrap();
        let q64 = build_quadrature(&d, 64).unwrap();
        let q128 = build_quadrature(&d, 128).unwrap();
        for &phi in &[1.0, 2.0 * PI, 4.0 * PI] {
            let a = ensemble_signal(|chi| readout(chi * phi), &EQUATOR, &q64);
            let b = ensemble_signal(|chi| readout(chi * phi), &EQUATOR, &q128);
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn change_of_variables(k in 0.1..5.0f64, phi in 0.0..6.0f64) {
            let g = SampleGeometry::new(1.0, k).unwrap();
            let d = LightShiftDistribution::from_geometry(&g, 1.0).unwrap();
            let q = build_quadrature(&d, 64).unwrap();
            let f = |chi: f64| (phi * chi).cos() + 0.3 * chi * chi;
            let a = q.integrate(f);
            let b = radial_average(&g, 1.0, f);
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }

        #[test]
        fn weight_is_nondecreasing(k in 0.01..6.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let d = LightShiftDistribution::new(1.0, k).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(d.weight_density(lo).unwrap() <= d.weight_density(hi).unwrap());
        }
    }
}
