//! Experiment configuration. Every physical quantity carries its SI unit in
//! the key name; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Rabi,
    Ramsey,
    Echo,
    Fit,
    FringeExtract,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Rabi => "rabi",
            ExperimentKind::Ramsey => "ramsey",
            ExperimentKind::Echo => "echo",
            ExperimentKind::Fit => "fit",
            ExperimentKind::FringeExtract => "fringe-extract",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSection>,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub decoherence: DecoherenceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<RabiSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramsey: Option<RamseySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo: Option<EchoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringe: Option<FringeSection>,
    /// Written into run manifests; ignored as input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub sample_radius_m: f64,
    pub beam_waist_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_max_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photons: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_per_photon_rad: Option<f64>,
    /// Every atom sees the peak shift; `k_ratio` and `[geometry]` are unused.
    #[serde(default)]
    pub homogeneous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self { nodes: default_nodes() }
    }
}

fn default_nodes() -> usize {
    lightshift_core::DEFAULT_NODES
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSection {
    #[serde(default)]
    pub homogeneous_decay_rate_per_s: f64,
    #[serde(default)]
    pub loss_per_pulse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub rabi_frequency_rad_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiSection {
    pub n_pulses: usize,
    #[serde(default = "default_drive_step")]
    pub drive_step_rad: f64,
}

fn default_drive_step() -> f64 {
    std::f64::consts::FRAC_PI_6
}

/// A kick `offset_s` into an evolution interval with peak phase
/// `peak_scale` times the configured peak shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickSpec {
    pub offset_s: f64,
    #[serde(default = "one")]
    pub peak_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySection {
    pub free_time_s: f64,
    pub detuning_start_hz: f64,
    pub detuning_stop_hz: f64,
    pub detuning_steps: usize,
    #[serde(default)]
    pub kicks: Vec<KickSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoSection {
    pub half_time_s: f64,
    pub detuning_hz: f64,
    pub offset_start_s: f64,
    pub offset_stop_s: f64,
    pub offset_steps: usize,
    #[serde(default)]
    pub kicks_before: Vec<KickSpec>,
    #[serde(default)]
    pub kicks_after: Vec<KickSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    DampedCosine,
    Inhomogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub model: FitModel,
    /// Trace to fit (`time_s,population_p4`). When absent, the trace is
    /// simulated from the `[rabi]` section with Gaussian noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<PathBuf>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_rabi_frequency_rad_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_chi_max_rad: Option<f64>,
    #[serde(default)]
    pub free_k_ratio: bool,
    #[serde(default)]
    pub free_decoherence: bool,
    #[serde(default)]
    pub free_amplitude_and_offset: bool,
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_starts() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSection {
    pub scan_csv: PathBuf,
    pub reference_csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|e| CliError::config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Makes input paths relative to `base` independent of the working
    /// directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = std::path::absolute(&joined).unwrap_or(joined);
            }
        };
        fix(&mut self.output.dir);
        if let Some(fit) = &mut self.fit {
            if let Some(p) = &mut fit.trace_csv {
                fix(p);
            }
        }
        if let Some(fr) = &mut self.fringe {
            fix(&mut fr.scan_csv);
            fix(&mut fr.reference_csv);
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Numerical(format!("manifest serialization: {e}")))
    }

    pub fn rabi_frequency(&self) -> Result<f64, CliError> {
        let w = self
            .drive
            .as_ref()
            .ok_or_else(|| CliError::config("missing key drive.rabi_frequency_rad_per_s"))?
            .rabi_frequency_rad_per_s;
        positive("drive.rabi_frequency_rad_per_s", w)
    }

    /// `k = w0 / r0` from `[geometry]` or `distribution.k_ratio`.
    pub fn k_ratio(&self) -> Result<f64, CliError> {
        let from_dist = self.distribution.as_ref().and_then(|d| d.k_ratio);
        match (&self.geometry, from_dist) {
            (Some(_), Some(_)) => Err(CliError::config(
                "distribution.k_ratio conflicts with [geometry]; give one of them",
            )),
            (Some(g), None) => {
                positive("geometry.sample_radius_m", g.sample_radius_m)?;
                positive("geometry.beam_waist_m", g.beam_waist_m)?;
                Ok(g.beam_waist_m / g.sample_radius_m)
            }
            (None, Some(k)) => non_negative("distribution.k_ratio", k),
            (None, None) => Err(CliError::config(
                "missing key distribution.k_ratio (or a [geometry] section)",
            )),
        }
    }

    /// Peak kick `chi0 * t_pulse` in rad.
    pub fn chi_max(&self) -> Result<f64, CliError> {
        let d = self
            .distribution
            .as_ref()
            .ok_or_else(|| CliError::config("missing section [distribution]"))?;
        match (d.chi_max_rad, d.photons, d.chi_per_photon_rad) {
            (Some(c), None, None) => non_negative("distribution.chi_max_rad", c),
            (None, Some(n), Some(per)) => {
                non_negative("distribution.photons", n)?;
                non_negative("distribution.chi_per_photon_rad", per)?;
                Ok(per * n)
            }
            (None, None, None) => Err(CliError::config(
                "missing key distribution.chi_max_rad (or distribution.photons with distribution.chi_per_photon_rad)",
            )),
            (Some(_), _, _) => Err(CliError::config(
                "distribution.chi_max_rad conflicts with distribution.photons / distribution.chi_per_photon_rad",
            )),
            (None, Some(_), None) => Err(CliError::config("missing key distribution.chi_per_photon_rad")),
            (None, None, Some(_)) => Err(CliError::config("missing key distribution.photons")),
        }
    }

    pub fn homogeneous(&self) -> bool {
        self.distribution.as_ref().is_some_and(|d| d.homogeneous)
    }

    pub fn nodes(&self) -> Result<usize, CliError> {
        if self.quadrature.nodes < 2 {
            return Err(CliError::config(format!(
                "quadrature.nodes must be at least 2, got {}",
                self.quadrature.nodes
            )));
        }
        Ok(self.quadrature.nodes)
    }

    pub fn decoherence(&self) -> Result<lightshift_core::DecoherenceModel, CliError> {
        let d = &self.decoherence;
        non_negative("decoherence.homogeneous_decay_rate_per_s", d.homogeneous_decay_rate_per_s)?;
        if !(0.0..=1.0).contains(&d.loss_per_pulse) {
            return Err(CliError::config(format!(
                "decoherence.loss_per_pulse must lie in [0, 1], got {}",
                d.loss_per_pulse
            )));
        }
        Ok(lightshift_core::DecoherenceModel::new(
            d.homogeneous_decay_rate_per_s,
            d.loss_per_pulse,
        ))
    }

    pub fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        opt.as_ref()
            .ok_or_else(|| CliError::config(format!("missing section [{name}]")))
    }
}

pub fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{key} must be positive and finite, got {v}")))
    }
}

pub fn non_negative(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{key} must be non-negative and finite, got {v}")))
    }
}

pub fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("{key} must be finite, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        let err = toml::from_str::<Config>("[rabi]\nn_pulses = 3\nfree_time = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("free_time"));
    }

    #[test]
    fn chi_from_photons() {
        let cfg: Config = toml::from_str(
            "[distribution]\nk_ratio = 0.35\nphotons = 2.0e6\nchi_per_photon_rad = 1.5e-7\n",
        )
        .unwrap();
        assert!((cfg.chi_max().unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(cfg.k_ratio().unwrap(), 0.35);
    }

    #[test]
    fn geometry_and_k_conflict() {
        let cfg: Config = toml::from_str(
            "[geometry]\nsample_radius_m = 2e-5\nbeam_waist_m = 7e-6\n[distribution]\nk_ratio = 0.35\nchi_max_rad = 0.3\n",
        )
        .unwrap();
        assert!(matches!(cfg.k_ratio(), Err(CliError::Config(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let text = "experiment = \"ramsey\"\nseed = 3\n[distribution]\nk_ratio = 0.35\nchi_max_rad = 0.1\n\
                    [drive]\nrabi_frequency_rad_per_s = 50000.0\n[ramsey]\nfree_time_s = 3e-4\n\
                    detuning_start_hz = -5000.0\ndetuning_stop_hz = 5000.0\ndetuning_steps = 11\n\
                    kicks = [{ offset_s = 1.5e-4, peak_scale = 1.0 }]\n";
        let cfg: Config = toml::from_str(text).unwrap();
        let again: Config = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
