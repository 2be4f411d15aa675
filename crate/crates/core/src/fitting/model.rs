use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{covariance, lm, rms, FitError, FitResult};
use crate::bloch::BlochVector;
use crate::inhomogeneous::{build_quadrature, LightShiftDistribution, QuadratureRule, DEFAULT_NODES};
use crate::probe::DecoherenceModel;
use crate::sequence::{run_experiment, PulseSequence, TraceSample};

const N_PARAMS: usize = 7;
const NAMES: [&str; N_PARAMS] = [
    "rabi_frequency",
    "chi_max_per_pulse",
    "k_ratio",
    "homogeneous_decay_rate",
    "loss_per_pulse",
    "amplitude_scale",
    "offset",
];
/// Relative jitter of each parameter between starts.
const JITTER: [f64; N_PARAMS] = [0.01, 0.5, 0.3, 0.5, 0.5, 0.05, 0.05];

/// Parameters of the ensemble model `offset + amplitude_scale * p4(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelFitParams {
    /// rad/s
    pub rabi_frequency: f64,
    /// Peak kick per unit template kick, rad.
    pub chi_max_per_pulse: f64,
    pub k_ratio: f64,
    /// 1/s
    pub homogeneous_decay_rate: f64,
    pub loss_per_pulse: f64,
    pub amplitude_scale: f64,
    pub offset: f64,
}

impl ModelFitParams {
    /// Unit amplitude, zero offset, no decoherence.
    pub fn ideal(rabi_frequency: f64, chi_max_per_pulse: f64, k_ratio: f64) -> Self {
        Self {
            rabi_frequency,
            chi_max_per_pulse,
            k_ratio,
            homogeneous_decay_rate: 0.0,
            loss_per_pulse: 0.0,
            amplitude_scale: 1.0,
            offset: 0.0,
        }
    }

    fn to_array(self) -> [f64; N_PARAMS] {
        [
            self.rabi_frequency,
            self.chi_max_per_pulse,
            self.k_ratio,
            self.homogeneous_decay_rate,
            self.loss_per_pulse,
            self.amplitude_scale,
            self.offset,
        ]
    }

    fn from_array(a: [f64; N_PARAMS]) -> Self {
        Self {
            rabi_frequency: a[0],
            chi_max_per_pulse: a[1],
            k_ratio: a[2],
            homogeneous_decay_rate: a[3],
            loss_per_pulse: a[4],
            amplitude_scale: a[5],
            offset: a[6],
        }
    }

    /// Folds sign-symmetric parameters onto their physical range.
    fn physical(self) -> Self {
        Self {
            rabi_frequency: self.rabi_frequency.abs(),
            chi_max_per_pulse: self.chi_max_per_pulse.abs(),
            k_ratio: self.k_ratio.abs(),
            homogeneous_decay_rate: self.homogeneous_decay_rate.abs(),
            loss_per_pulse: self.loss_per_pulse.abs().min(1.0),
            ..self
        }
    }
}

/// Which parameters the fit may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeParameters {
    pub rabi_frequency: bool,
    pub chi_max_per_pulse: bool,
    pub k_ratio: bool,
    pub homogeneous_decay_rate: bool,
    pub loss_per_pulse: bool,
    pub amplitude_scale: bool,
    pub offset: bool,
}

impl Default for FreeParameters {
    fn default() -> Self {
        Self {
            rabi_frequency: true,
            chi_max_per_pulse: true,
            k_ratio: false,
            homogeneous_decay_rate: false,
            loss_per_pulse: false,
            amplitude_scale: false,
            offset: false,
        }
    }
}

impl FreeParameters {
    fn mask(&self) -> [bool; N_PARAMS] {
        [
            self.rabi_frequency,
            self.chi_max_per_pulse,
            self.k_ratio,
            self.homogeneous_decay_rate,
            self.loss_per_pulse,
            self.amplitude_scale,
            self.offset,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFitOptions {
    pub free: FreeParameters,
    pub nodes: usize,
    /// Number of starting points, the first being the supplied initial values.
    pub starts: usize,
    pub seed: u64,
    /// Residual evaluations per start.
    pub max_evaluations: usize,
    pub initial_state: BlochVector,
}

impl Default for ModelFitOptions {
    fn default() -> Self {
        Self {
            free: FreeParameters::default(),
            nodes: DEFAULT_NODES,
            starts: 5,
            seed: 0,
            max_evaluations: 600,
            initial_state: BlochVector::GROUND,
        }
    }
}

fn unit_rule(k_ratio: f64, nodes: usize) -> Result<QuadratureRule, FitError> {
    let dist = LightShiftDistribution::new(1.0, k_ratio)?;
    Ok(build_quadrature(&dist, nodes)?)
}

fn simulate_with_rule(
    template: &PulseSequence,
    p: &ModelFitParams,
    rule: &QuadratureRule,
    s0: &BlochVector,
) -> Result<Vec<TraceSample>, FitError> {
    let seq = template
        .with_rabi_frequency(p.rabi_frequency)
        .with_kick_scale(p.chi_max_per_pulse);
    let dec = DecoherenceModel::new(p.homogeneous_decay_rate, p.loss_per_pulse);
    let trace = run_experiment(&seq, rule, &dec, s0)?;
    Ok(trace
        .into_iter()
        .map(|s| TraceSample {
            time: s.time,
            population_p4: p.offset + p.amplitude_scale * s.population_p4,
        })
        .collect())
}

/// Forward model used by the fit. Kick phases in `template` are multiplied by
/// `chi_max_per_pulse` and every drive runs at `rabi_frequency`.
pub fn simulate_model(
    template: &PulseSequence,
    params: &ModelFitParams,
    nodes: usize,
    initial_state: &BlochVector,
) -> Result<Vec<TraceSample>, FitError> {
    let p = params.physical();
    let rule = unit_rule(p.k_ratio, nodes)?;
    simulate_with_rule(template, &p, &rule, initial_state)
}

fn check_against_template(trace: &[TraceSample], template: &PulseSequence) -> Result<(), FitError> {
    let times = template.record_times();
    if times.len() != trace.len() {
        return Err(FitError::TraceMismatch(format!(
            "{} samples for {} recording kicks",
            trace.len(),
            times.len()
        )));
    }
    let tol = 1e-9 * template.duration().max(f64::MIN_POSITIVE);
    for (i, (s, t)) in trace.iter().zip(&times).enumerate() {
        if !s.population_p4.is_finite() {
            return Err(FitError::NonFinite);
        }
        if (s.time - t).abs() > tol {
            return Err(FitError::TraceMismatch(format!(
                "sample {i} at t = {} s, template records at {t} s",
                s.time
            )));
        }
    }
    Ok(())
}

fn warn_if_clamped(raw: &ModelFitParams, mask: &[bool; N_PARAMS]) {
    let raw = raw.to_array();
    for j in 0..5 {
        if mask[j] && raw[j] < 0.0 {
            log::warn!("{} fitted negative ({:.4e}); reported as its magnitude", NAMES[j], raw[j]);
        }
    }
    if mask[4] && raw[4].abs() > 1.0 {
        log::warn!("loss_per_pulse fitted above 1 ({:.4e}); clamped to 1", raw[4]);
    }
}

/// Least-squares fit of the ensemble model to a trace recorded with the
/// structure of `template`.
///
/// Runs `options.starts` Levenberg–Marquardt starts: the supplied values and
/// seeded jitters of the free parameters. The lowest residual wins; ties go to
/// the earlier start.
pub fn fit_inhomogeneous_model(
    trace: &[TraceSample],
    template: &PulseSequence,
    init: ModelFitParams,
    options: &ModelFitOptions,
) -> Result<FitResult<ModelFitParams>, FitError> {
    check_against_template(trace, template)?;
    let mask = options.free.mask();
    let free: Vec<usize> = (0..N_PARAMS).filter(|&j| mask[j]).collect();
    if free.is_empty() {
        return Err(FitError::InvalidInit("no free parameters"));
    }
    if trace.len() < free.len() {
        return Err(FitError::InsufficientData {
            needed: free.len(),
            got: trace.len(),
        });
    }
    let base = init.to_array();
    if base.iter().any(|v| !v.is_finite()) || init.rabi_frequency == 0.0 {
        return Err(FitError::InvalidInit("parameters must be finite with nonzero rabi frequency"));
    }

    let span = template.duration().max(f64::MIN_POSITIVE);
    let typical_all = [
        base[0].abs(),
        base[1].abs().max(0.1),
        base[2].abs().max(0.1),
        base[3].abs().max(1.0 / span),
        base[4].abs().max(1e-3),
        base[5].abs().max(1.0),
        base[6].abs().max(1.0),
    ];
    let typical: Vec<f64> = free.iter().map(|&j| typical_all[j]).collect();
    let fixed_rule = if mask[2] {
        None
    } else {
        Some(unit_rule(base[2].abs(), options.nodes)?)
    };

    let assemble = |x: &[f64]| -> ModelFitParams {
        let mut full = base;
        for (&j, &v) in free.iter().zip(x) {
            full[j] = v;
        }
        ModelFitParams::from_array(full)
    };
    let residual_fn = |x: &[f64]| -> Option<Vec<f64>> {
        let p = assemble(x).physical();
        let sim = match &fixed_rule {
            Some(rule) => simulate_with_rule(template, &p, rule, &options.initial_state),
            None => unit_rule(p.k_ratio, options.nodes)
                .and_then(|rule| simulate_with_rule(template, &p, &rule, &options.initial_state)),
        }
        .ok()?;
        Some(
            sim.iter()
                .zip(trace)
                .map(|(m, d)| m.population_p4 - d.population_p4)
                .collect(),
        )
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let starts: Vec<Vec<f64>> = (0..options.starts.max(1))
        .map(|i| {
            free.iter()
                .map(|&j| {
                    let jitter = if i == 0 {
                        0.0
                    } else {
                        rng.random_range(-1.0..=1.0) * JITTER[j]
                    };
                    base[j] + jitter * typical_all[j]
                })
                .collect()
        })
        .collect();

    let scale = 0.5 * trace.iter().map(|s| s.population_p4 * s.population_p4).sum::<f64>();
    let outcomes: Vec<Option<lm::Outcome>> = starts
        .par_iter()
        .map(|x0| lm::minimize(&residual_fn, x0, &typical, scale, options.max_evaluations))
        .collect();
    let evaluations: usize = outcomes.iter().flatten().map(|o| o.evaluations).sum();
    let best = outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(i, o)| o.map(|o| (i, o)))
        .min_by(|(ia, a), (ib, b)| a.objective().total_cmp(&b.objective()).then(ia.cmp(ib)))
        .map(|(_, o)| o)
        .ok_or(FitError::NonFinite)?;

    let raw = assemble(&best.x);
    warn_if_clamped(&raw, &mask);
    Ok(FitResult {
        params: raw.physical(),
        parameter_names: free.iter().map(|&j| NAMES[j]).collect(),
        covariance: covariance(&best.jacobian, &best.residuals),
        residual_rms: rms(best.residuals.as_slice()),
        n_iterations: evaluations,
        converged: best.converged,
        gradient_norm: best.gradient_norm,
    })
}
