use lightshift_core::fitting::{
    extract_ramsey_fringe, fit_damped_cosine, fit_inhomogeneous_model, guess_damped_cosine, FreeParameters,
    ModelFitOptions, ModelFitParams,
};
use lightshift_core::sequence::{build_rabi, linspace};
use lightshift_core::{
    build_quadrature, run_experiment, BlochVector, EchoProtocol, FitResult, KickPlacement, LightShiftDistribution,
    QuadratureRule, RamseyProtocol, TraceSample,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use toml::{Table as TomlTable, Value};

use crate::config::{finite, non_negative, positive, Config, ExperimentKind, FitModel, KickSpec};
use crate::error::CliError;
use crate::io::{Table, DETUNING_HEADER, TIME_HEADER};

/// Files produced by one experiment, name and contents.
pub type Outputs = Vec<(&'static str, Vec<u8>)>;

pub fn execute(cfg: &Config, kind: ExperimentKind) -> Result<Outputs, CliError> {
    match kind {
        ExperimentKind::Rabi => Ok(vec![("trace.csv", rabi_trace(cfg)?.to_csv()?)]),
        ExperimentKind::Ramsey => Ok(vec![("trace.csv", ramsey(cfg)?.to_csv()?)]),
        ExperimentKind::Echo => Ok(vec![("trace.csv", echo(cfg)?.to_csv()?)]),
        ExperimentKind::Fit => fit(cfg),
        ExperimentKind::FringeExtract => fringe(cfg),
    }
}

fn quadrature(cfg: &Config) -> Result<(f64, QuadratureRule), CliError> {
    let chi0 = cfg.chi_max()?;
    if cfg.homogeneous() {
        return Ok((chi0, QuadratureRule::homogeneous(chi0)));
    }
    let dist = LightShiftDistribution::new(chi0, cfg.k_ratio()?)?;
    Ok((chi0, build_quadrature(&dist, cfg.nodes()?)?))
}

fn check_p4(rows: &[(f64, f64)]) -> Result<(), CliError> {
    match rows
        .iter()
        .find(|(_, p)| !(-1e-9..=1.0 + 1e-9).contains(p))
    {
        Some((x, p)) => Err(CliError::Numerical(format!("population {p} outside [0, 1] at {x}"))),
        None => Ok(()),
    }
}

fn to_table(header: &str, rows: Vec<(f64, f64)>) -> Result<Table, CliError> {
    check_p4(&rows)?;
    Ok(Table::new(header, rows))
}

fn rabi_trace(cfg: &Config) -> Result<Table, CliError> {
    let rabi = Config::section(&cfg.rabi, "rabi")?;
    let omega = cfg.rabi_frequency()?;
    let (chi0, quad) = quadrature(cfg)?;
    let seq = build_rabi(
        rabi.n_pulses,
        omega,
        finite("rabi.drive_step_rad", rabi.drive_step_rad)?,
        chi0,
    )?;
    let trace = run_experiment(&seq, &quad, &cfg.decoherence()?, &BlochVector::GROUND)?;
    to_table(TIME_HEADER, trace.iter().map(|s| (s.time, s.population_p4)).collect())
}

fn placements(kicks: &[KickSpec], chi0: f64, key: &str) -> Result<Vec<KickPlacement>, CliError> {
    kicks
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let offset = non_negative(&format!("{key}[{i}].offset_s"), k.offset_s)?;
            let scale = finite(&format!("{key}[{i}].peak_scale"), k.peak_scale)?;
            Ok(KickPlacement::new(offset, scale * chi0))
        })
        .collect()
}

fn grid(start: f64, stop: f64, steps: usize, key: &str) -> Result<Vec<f64>, CliError> {
    finite(&format!("{key}_start"), start)?;
    finite(&format!("{key}_stop"), stop)?;
    if steps < 2 {
        return Err(CliError::config(format!("{key}_steps must be at least 2, got {steps}")));
    }
    Ok(linspace(start, stop, steps))
}

fn ramsey(cfg: &Config) -> Result<Table, CliError> {
    let r = Config::section(&cfg.ramsey, "ramsey")?;
    let (chi0, quad) = quadrature(cfg)?;
    let proto = RamseyProtocol {
        rabi_frequency: cfg.rabi_frequency()?,
        free_time: non_negative("ramsey.free_time_s", r.free_time_s)?,
        kicks: placements(&r.kicks, chi0, "ramsey.kicks")?,
    };
    let dets = grid(r.detuning_start_hz, r.detuning_stop_hz, r.detuning_steps, "ramsey.detuning")?;
    to_table(DETUNING_HEADER, proto.scan(&dets, &quad, &cfg.decoherence()?)?)
}

fn echo(cfg: &Config) -> Result<Table, CliError> {
    let e = Config::section(&cfg.echo, "echo")?;
    let (chi0, quad) = quadrature(cfg)?;
    let proto = EchoProtocol {
        rabi_frequency: cfg.rabi_frequency()?,
        half_time: non_negative("echo.half_time_s", e.half_time_s)?,
        detuning: finite("echo.detuning_hz", e.detuning_hz)?,
        kicks_before: placements(&e.kicks_before, chi0, "echo.kicks_before")?,
        kicks_after: placements(&e.kicks_after, chi0, "echo.kicks_after")?,
    };
    let offsets = grid(e.offset_start_s, e.offset_stop_s, e.offset_steps, "echo.offset")?;
    to_table(TIME_HEADER, proto.scan(&offsets, &quad, &cfg.decoherence()?)?)
}

fn fit_trace(cfg: &Config) -> Result<Table, CliError> {
    let f = Config::section(&cfg.fit, "fit")?;
    if let Some(path) = &f.trace_csv {
        let t = Table::read(path)?;
        if t.x_header != TIME_HEADER {
            return Err(CliError::config(format!(
                "fit.trace_csv: expected a `{TIME_HEADER}` column, got `{}`",
                t.x_header
            )));
        }
        return Ok(t);
    }
    let mut t = rabi_trace(cfg)?;
    let sigma = non_negative("fit.noise_std", f.noise_std)?;
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| CliError::config(format!("fit.noise_std: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for row in &mut t.rows {
            row.1 += noise.sample(&mut rng);
        }
    }
    Ok(t)
}

fn result_toml<P>(
    model: &str,
    fit: &FitResult<P>,
    params: TomlTable,
    sigmas: TomlTable,
) -> Result<Vec<u8>, CliError> {
    let mut summary = TomlTable::new();
    summary.insert("model".into(), Value::from(model));
    summary.insert("converged".into(), Value::from(fit.converged));
    summary.insert("residual_rms".into(), Value::from(fit.residual_rms));
    summary.insert("gradient_norm".into(), Value::from(fit.gradient_norm));
    summary.insert("n_iterations".into(), Value::from(fit.n_iterations as i64));
    let mut doc = TomlTable::new();
    doc.insert("fit".into(), Value::Table(summary));
    doc.insert("parameters".into(), Value::Table(params));
    doc.insert("uncertainties".into(), Value::Table(sigmas));
    toml::to_string(&doc)
        .map(String::into_bytes)
        .map_err(|e| CliError::Numerical(format!("result serialization: {e}")))
}

fn params_table(pairs: &[(&str, f64)]) -> TomlTable {
    pairs.iter().map(|(k, v)| ((*k).to_string(), Value::from(*v))).collect()
}

fn fit(cfg: &Config) -> Result<Outputs, CliError> {
    let f = Config::section(&cfg.fit, "fit")?;
    let data = fit_trace(cfg)?;
    let samples: Vec<TraceSample> = data
        .rows
        .iter()
        .map(|&(time, population_p4)| TraceSample { time, population_p4 })
        .collect();

    let result = match f.model {
        FitModel::DampedCosine => {
            let fit = fit_damped_cosine(&samples, guess_damped_cosine(&samples)?)?;
            let p = fit.params;
            let table = params_table(&[
                ("amplitude", p.amplitude),
                ("decay_time_s", p.decay_time),
                ("frequency_rad_per_s", p.frequency),
                ("phase_rad", p.phase),
                ("offset", p.offset),
            ]);
            // the fit runs in decay rate; sigma_tau = sigma_rate * tau²
            let sigma = |name| fit.uncertainty(name).filter(|s| s.is_finite());
            let mut sigmas = TomlTable::new();
            for (key, name, scale) in [
                ("amplitude", "amplitude", 1.0),
                ("decay_time_s", "decay_rate", p.decay_time * p.decay_time),
                ("frequency_rad_per_s", "frequency", 1.0),
                ("phase_rad", "phase", 1.0),
                ("offset", "offset", 1.0),
            ] {
                if let Some(s) = sigma(name).map(|s| s * scale).filter(|s| s.is_finite()) {
                    sigmas.insert(key.into(), Value::from(s));
                }
            }
            result_toml("damped-cosine", &fit, table, sigmas)?
        }
        FitModel::Inhomogeneous => {
            let rabi = Config::section(&cfg.rabi, "rabi")?;
            let omega = cfg.rabi_frequency()?;
            let template = build_rabi(rabi.n_pulses, omega, rabi.drive_step_rad, 1.0)?;
            let dec = cfg.decoherence()?;
            let init = ModelFitParams {
                rabi_frequency: positive(
                    "fit.init_rabi_frequency_rad_per_s",
                    f.init_rabi_frequency_rad_per_s.unwrap_or(omega),
                )?,
                chi_max_per_pulse: non_negative("fit.init_chi_max_rad", f.init_chi_max_rad.unwrap_or(0.1))?,
                k_ratio: cfg.k_ratio()?,
                homogeneous_decay_rate: dec.homogeneous_decay_rate,
                loss_per_pulse: dec.population_loss_per_pulse,
                amplitude_scale: 1.0,
                offset: 0.0,
            };
            let options = ModelFitOptions {
                free: FreeParameters {
                    rabi_frequency: true,
                    chi_max_per_pulse: true,
                    k_ratio: f.free_k_ratio,
                    homogeneous_decay_rate: f.free_decoherence,
                    loss_per_pulse: f.free_decoherence,
                    amplitude_scale: f.free_amplitude_and_offset,
                    offset: f.free_amplitude_and_offset,
                },
                nodes: cfg.nodes()?,
                starts: f.starts.max(1),
                seed: cfg.seed,
                ..ModelFitOptions::default()
            };
            let fit = fit_inhomogeneous_model(&samples, &template, init, &options)?;
            let p = fit.params;
            let table = params_table(&[
                ("rabi_frequency", p.rabi_frequency),
                ("chi_max_per_pulse", p.chi_max_per_pulse),
                ("k_ratio", p.k_ratio),
                ("homogeneous_decay_rate", p.homogeneous_decay_rate),
                ("loss_per_pulse", p.loss_per_pulse),
                ("amplitude_scale", p.amplitude_scale),
                ("offset", p.offset),
            ]);
            let sigmas = fit
                .parameter_names
                .iter()
                .filter_map(|&name| fit.uncertainty(name).map(|s| (name.to_string(), Value::from(s))))
                .collect();
            result_toml("inhomogeneous", &fit, table, sigmas)?
        }
    };
    Ok(vec![("trace.csv", data.to_csv()?), ("fit_result.toml", result)])
}

fn fringe(cfg: &Config) -> Result<Outputs, CliError> {
    let f = Config::section(&cfg.fringe, "fringe")?;
    let scan = Table::read(&f.scan_csv)?;
    let reference = Table::read(&f.reference_csv)?;
    if scan.x_header != reference.x_header {
        return Err(CliError::config(format!(
            "fringe.scan_csv and fringe.reference_csv use different columns (`{}` vs `{}`)",
            scan.x_header, reference.x_header
        )));
    }
    let c = extract_ramsey_fringe(&scan.rows, &reference.rows)?;
    let fit_table = |fit: &lightshift_core::fitting::FringeFit| -> TomlTable {
        params_table(&[
            ("amplitude", fit.amplitude),
            ("phase_rad", fit.phase),
            ("offset", fit.offset),
            ("angular_frequency", fit.angular_frequency),
            ("residual_rms", fit.residual_rms),
        ])
    };
    let mut summary = TomlTable::new();
    summary.insert("scan_variable".into(), Value::from(scan.x_header.as_str()));
    summary.insert("phase_shift_rad".into(), Value::from(c.phase_shift));
    summary.insert("amplitude_ratio".into(), Value::from(c.amplitude_ratio));
    summary.insert("period".into(), Value::from(c.period));
    let mut doc = TomlTable::new();
    doc.insert("fringe".into(), Value::Table(summary));
    doc.insert("reference".into(), Value::Table(fit_table(&c.reference)));
    doc.insert("scan".into(), Value::Table(fit_table(&c.scan)));
    let text = toml::to_string(&doc).map_err(|e| CliError::Numerical(format!("result serialization: {e}")))?;
    Ok(vec![("fringe_result.toml", text.into_bytes())])
}
