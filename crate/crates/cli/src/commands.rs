use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use diffest::calibration::{
    calibrate_noise, choose_hyperdiffusion, lyapunov_stationary, NoiseParameters,
};
use diffest::mean_iteration::{
    kappa_relative_error, run_outer_iteration, ConvergenceReport, IterationOptions,
    OuterIterationResult, SourceSchedule,
};
use diffest::model::{continuous_generator, reduced_index};
use diffest::simulate::{
    simulate_truth_with, synthesize_measurements, MeasurementSet, TruthOptions, TruthTrajectory,
};
use diffest::spectral::collocation_points;
use diffest::{ModelConfig, SpectralField};
use log::{info, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::table::{
    ensure_dir, parse_f64, parse_usize, read_table, write_json, write_table, Manifest,
};

pub const TRUTH_MODES: &str = "truth_modes.csv";
pub const TRUTH_GRID: &str = "truth_grid.csv";
pub const MEASUREMENTS: &str = "measurements.csv";
pub const SMOOTHED: &str = "smoothed_states.csv";
pub const MEAN_FIELDS: &str = "mean_fields.csv";
pub const CONVERGENCE: &str = "convergence.json";
pub const ERROR_METRICS: &str = "error_metrics.csv";

fn num(v: f64) -> String {
    v.to_string()
}

fn source_field(cfg: &ExperimentConfig) -> SpectralField {
    SpectralField::from_fn(cfg.model.n_modes, |x| cfg.source.eval(x))
}

/// Spin-up followed by the recorded truth window.
pub fn simulate_twin(cfg: &ExperimentConfig) -> CliResult<TruthTrajectory> {
    let model = cfg.truth_model();
    let kappa_spec = cfg.truth_kappa();
    let kappa = |x: f64, _t: f64| kappa_spec.eval(x);
    let source = |x: f64, _t: f64| cfg.source.eval(x);
    let mut options = TruthOptions {
        refinement: cfg.truth.refinement,
        ..Default::default()
    };
    if cfg.truth.spinup_steps > 0 {
        let spin_model = ModelConfig {
            n_steps: cfg.truth.spinup_steps,
            alpha1: 0.0,
            alpha2: 0.0,
            ..model.clone()
        };
        let spin = simulate_truth_with(&spin_model, &kappa, &source, cfg.truth_seed(), &options)?;
        options.initial_temperature = spin.temperature.last().cloned();
    }
    Ok(simulate_truth_with(&model, &kappa, &source, cfg.truth_seed(), &options)?)
}

fn mode_rows<'a>(step: usize, t: f64, block: &str, field: &'a SpectralField) -> impl Iterator<Item = Vec<String>> + 'a {
    let block = block.to_owned();
    (0..=field.n_modes() as i64).map(move |k| {
        let c = field.coeff(k);
        vec![step.to_string(), num(t), block.clone(), k.to_string(), num(c.re), num(c.im)]
    })
}

pub fn write_truth(out: &Path, cfg: &ExperimentConfig, truth: &TruthTrajectory) -> CliResult<()> {
    let mut rows = Vec::new();
    for (i, &t) in truth.times.iter().enumerate() {
        rows.extend(mode_rows(i, t, "T", &truth.temperature[i]));
        rows.extend(mode_rows(i, t, "theta", &truth.theta[i]));
    }
    write_table(
        &out.join(TRUTH_MODES),
        "truth-modes",
        "coefficients of exp(ikx) for k >= 0; theta = ln kappa",
        &["step", "t", "block", "k", "re", "im"],
        rows,
    )?;
    let grid = collocation_points(cfg.model.n_modes);
    let mut rows = Vec::new();
    for (i, &t) in truth.times.iter().enumerate() {
        let temp = truth.temperature[i].to_physical()?;
        let kappa = truth.kappa_physical(i)?;
        for (j, &x) in grid.iter().enumerate() {
            rows.push(vec![i.to_string(), num(t), num(x), num(temp[j]), num(kappa[j])]);
        }
    }
    write_table(
        &out.join(TRUTH_GRID),
        "truth-grid",
        "x in [-pi, pi); temperature and diffusivity on the collocation grid",
        &["step", "t", "x", "temperature", "kappa"],
        rows,
    )
}

pub fn read_truth(path: &Path, model: &ModelConfig) -> CliResult<TruthTrajectory> {
    let table = read_table(path, "truth-modes")?;
    let n = model.n_modes;
    let steps = model.n_steps + 1;
    let mut times = vec![f64::NAN; steps];
    let mut temperature = vec![SpectralField::zeros(n); steps];
    let mut theta = vec![SpectralField::zeros(n); steps];
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != 6 {
            return Err(CliError::Data(format!("{}: row {r} has {} columns, expected 6", path.display(), row.len())));
        }
        let step = parse_usize(&row[0], r, "step", path)?;
        let k = parse_usize(&row[3], r, "k", path)?;
        if step >= steps || k > n {
            return Err(CliError::Data(format!(
                "{}: row {r} (step {step}, k {k}) does not fit N_f = {}, N_T = {n}",
                path.display(),
                model.n_steps
            )));
        }
        times[step] = parse_f64(&row[1], r, "t", path)?;
        let c = Complex64::new(parse_f64(&row[4], r, "re", path)?, parse_f64(&row[5], r, "im", path)?);
        match row[2].as_str() {
            "T" => temperature[step].set_mode(k as i64, c),
            "theta" => theta[step].set_mode(k as i64, c),
            other => return Err(CliError::Data(format!("{}: row {r}: unknown block `{other}`", path.display()))),
        }
    }
    if let Some(missing) = times.iter().position(|t| t.is_nan()) {
        return Err(CliError::Data(format!("{}: step {missing} is missing", path.display())));
    }
    Ok(TruthTrajectory {
        times,
        temperature,
        theta,
        seed: 0,
    })
}

pub fn write_measurements(path: &Path, ms: &MeasurementSet) -> CliResult<()> {
    let m = ms.sensor_locations.len();
    let mut columns = vec!["step".to_owned(), "t".to_owned()];
    columns.extend((0..m).map(|l| format!("y{l}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let rows = (0..ms.n_measurements()).map(|j| {
        let mut row = vec![ms.steps[j].to_string(), num(ms.times[j])];
        row.extend((0..m).map(|l| num(ms.values[(l, j)])));
        row
    });
    let sensors: Vec<String> = ms.sensor_locations.iter().map(|x| num(*x)).collect();
    write_table(path, "measurements", &format!("sensors at x = {}", sensors.join(" ")), &cols, rows)
}

pub fn read_measurements(path: &Path, model: &ModelConfig) -> CliResult<MeasurementSet> {
    let table = read_table(path, "measurements")?;
    let m = model.n_sensors();
    if table.columns.len() != m + 2 {
        return Err(CliError::Data(format!(
            "{}: {} sensor columns but the config has m = {m} sensors",
            path.display(),
            table.columns.len().saturating_sub(2)
        )));
    }
    let count = table.rows.len();
    let mut steps = Vec::with_capacity(count);
    let mut times = Vec::with_capacity(count);
    let mut values = DMatrix::zeros(m, count);
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != m + 2 {
            return Err(CliError::Data(format!("{}: row {r} has {} columns, expected {}", path.display(), row.len(), m + 2)));
        }
        let step = parse_usize(&row[0], r, "step", path)?;
        if step == 0 || step > model.n_steps || steps.last().is_some_and(|&s| s >= step) {
            return Err(CliError::Data(format!(
                "{}: row {r}: step {step} is outside 1..={} or out of order",
                path.display(),
                model.n_steps
            )));
        }
        steps.push(step);
        times.push(parse_f64(&row[1], r, "t", path)?);
        for l in 0..m {
            values[(l, r)] = parse_f64(&row[l + 2], r, &table.columns[l + 2], path)?;
        }
    }
    Ok(MeasurementSet {
        times,
        steps,
        values,
        sensor_locations: model.sensor_locations.clone(),
        sensor_sigmas: model.sensor_sigmas.clone(),
    })
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let mut manifest = Manifest::new("simulate", cfg);
    let start = Instant::now();
    let truth = simulate_twin(cfg)?;
    let ms = synthesize_measurements(&truth, &cfg.model, cfg.measure_every, cfg.measurement_seed())?;
    manifest.timings_seconds.insert("simulate".into(), start.elapsed().as_secs_f64());
    write_truth(out, cfg, &truth)?;
    write_measurements(&out.join(MEASUREMENTS), &ms)?;
    manifest.seeds.insert("truth".into(), cfg.truth_seed());
    manifest.seeds.insert("measurements".into(), cfg.measurement_seed());
    for f in [TRUTH_MODES, TRUTH_GRID, MEASUREMENTS] {
        manifest.add_file(out, f)?;
    }
    manifest.write(out)?;
    info!("simulated {} steps, {} measurement times", truth.n_steps(), ms.n_measurements());
    Ok(())
}

/// Outcome of one estimation run.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub iterations: usize,
    pub best_iteration: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Per-iteration κ̄ relative error, when the truth is known.
    pub kappa_errors: Option<Vec<f64>>,
    pub final_kappa_error: Option<f64>,
}

#[derive(Serialize)]
struct ConvergenceFile<'a> {
    format: String,
    report: &'a ConvergenceReport,
    kappa_errors: Option<&'a Vec<f64>>,
}

fn write_estimate_outputs(
    out: &Path,
    cfg: &ExperimentConfig,
    res: &OuterIterationResult,
    manifest: &mut Manifest,
) -> CliResult<()> {
    let n = cfg.model.n_modes;
    let len = 2 * n + 1;
    let dt = cfg.model.dt;
    let mut rows = Vec::new();
    for (i, b) in res.smoothed.beliefs.iter().enumerate() {
        let sd = b.std_devs();
        for (block, offset) in [("T", 0), ("theta", len)] {
            for k in 0..=n {
                let (re, im, sd_re, sd_im) = if k == 0 {
                    (b.mean[offset], 0.0, sd[offset], 0.0)
                } else {
                    let r = offset + 2 * k - 1;
                    (b.mean[r], b.mean[r + 1], sd[r], sd[r + 1])
                };
                rows.push(vec![
                    i.to_string(),
                    num(i as f64 * dt),
                    block.to_owned(),
                    k.to_string(),
                    num(re),
                    num(im),
                    num(sd_re),
                    num(sd_im),
                ]);
            }
        }
    }
    write_table(
        &out.join(SMOOTHED),
        "smoothed-states",
        "fluctuation coefficients about the final means; sd = marginal standard deviation",
        &["step", "t", "block", "k", "re", "im", "sd_re", "sd_im"],
        rows,
    )?;

    let grid = collocation_points(n);
    let means = &res.means;
    let mut rows = Vec::new();
    for i in 0..means.len() {
        let t_bar = means.t_bar[i].to_physical()?;
        let kappa = means.kappa_physical(i)?;
        let flux = means.flux_bar[i].to_physical()?;
        for (j, &x) in grid.iter().enumerate() {
            rows.push(vec![
                i.to_string(),
                num(i as f64 * dt),
                num(x),
                num(t_bar[j]),
                num(kappa[j]),
                num(flux[j]),
            ]);
        }
    }
    write_table(
        &out.join(MEAN_FIELDS),
        "mean-fields",
        "mean temperature, diffusivity and heat flux on the collocation grid",
        &["step", "t", "x", "t_bar", "kappa_bar", "flux_bar"],
        rows,
    )?;
    for f in [SMOOTHED, MEAN_FIELDS] {
        manifest.add_file(out, f)?;
    }
    Ok(())
}

/// Runs the outer iteration and writes every estimation artifact into `out`.
pub fn estimate(
    cfg: &ExperimentConfig,
    ms: &MeasurementSet,
    truth: Option<&TruthTrajectory>,
    out: &Path,
) -> CliResult<EstimateSummary> {
    ensure_dir(out)?;
    let mut manifest = Manifest::new("estimate", cfg);
    let source = SourceSchedule::from_fn(&cfg.model, &|x, _t| cfg.source.eval(x))?;
    let options = IterationOptions {
        max_iters: cfg.estimate.max_iters,
        tol: cfg.estimate.tol,
        kernel_scale: cfg.estimate.kernel_scale,
        initial: None,
    };
    let start = Instant::now();
    let res = run_outer_iteration(&cfg.model, ms, &source, &options)?;
    manifest.timings_seconds.insert("estimate".into(), start.elapsed().as_secs_f64());

    let kappa_errors = match truth {
        Some(t) => Some(
            res.history
                .iter()
                .map(|m| kappa_relative_error(m, t))
                .collect::<diffest::Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    let final_kappa_error = match truth {
        Some(t) => Some(kappa_relative_error(&res.means, t)?),
        None => None,
    };

    write_estimate_outputs(out, cfg, &res, &mut manifest)?;
    write_json(
        &out.join(CONVERGENCE),
        &ConvergenceFile {
            format: "diffest-convergence v1".into(),
            report: &res.report,
            kappa_errors: kappa_errors.as_ref(),
        },
    )?;
    manifest.add_file(out, CONVERGENCE)?;
    if let Some(errors) = &kappa_errors {
        write_table(
            &out.join(ERROR_METRICS),
            "error-metrics",
            "relative space-time L2 error of the mean diffusivity against the truth",
            &["iteration", "kappa_rel_l2"],
            errors.iter().enumerate().map(|(i, e)| vec![i.to_string(), num(*e)]),
        )?;
        manifest.add_file(out, ERROR_METRICS)?;
    }
    manifest.convergence = serde_json::to_value(&res.report.records).ok();
    manifest.write(out)?;

    let summary = EstimateSummary {
        iterations: res.report.records.len().saturating_sub(1),
        best_iteration: res.report.best_iteration,
        converged: res.report.converged,
        diverged: res.report.diverged,
        kappa_errors,
        final_kappa_error,
    };
    info!(
        "estimate: {} iterations, converged {}, diverged {}",
        summary.iterations, summary.converged, summary.diverged
    );
    Ok(summary)
}

pub fn cmd_estimate(cfg: &ExperimentConfig, measurements: &Path, out: &Path) -> CliResult<EstimateSummary> {
    let ms = read_measurements(measurements, &cfg.model)?;
    let truth_path = measurements
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(TRUTH_MODES);
    let truth = if truth_path.exists() {
        Some(read_truth(&truth_path, &cfg.model)?)
    } else {
        None
    };
    let summary = estimate(cfg, &ms, truth.as_ref(), out)?;
    if summary.diverged {
        return Err(CliError::Divergence(format!(
            "objective increased on consecutive iterations; best iterate {} written to {}",
            summary.best_iteration,
            out.display()
        )));
    }
    Ok(summary)
}

/// Variance targets `(|k|, C_k)` and μ₁ candidates for `calibrate`.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    #[serde(default)]
    pub temperature: Vec<(u32, f64)>,
    #[serde(default)]
    pub theta: Vec<(u32, f64)>,
    #[serde(default)]
    pub mu1_candidates: Vec<f64>,
}

#[derive(Serialize)]
struct CalibrationFile {
    format: String,
    noise: NoiseParameters,
    mu1_star: f64,
    model: ModelConfig,
}

pub fn cmd_calibrate(cfg: &ExperimentConfig, targets_path: &Path, out: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(targets_path).map_err(|e| CliError::io(targets_path, e))?;
    let targets: CalibrationTargets = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", targets_path.display())))?;
    ensure_dir(out)?;
    let mut manifest = Manifest::new("calibrate", cfg);
    let start = Instant::now();

    let noise = calibrate_noise(&targets.temperature, &targets.theta, &cfg.model)?;
    let source = source_field(cfg);
    let candidates = if targets.mu1_candidates.is_empty() {
        vec![cfg.model.mu1]
    } else {
        targets.mu1_candidates.clone()
    };
    let choice = choose_hyperdiffusion(
        &ModelConfig {
            alpha1: noise.alpha1,
            beta1: noise.beta1,
            ..cfg.model.clone()
        },
        &source,
        &candidates,
    )?;
    let model = ModelConfig {
        alpha1: noise.alpha1,
        beta1: noise.beta1,
        alpha2: noise.alpha2,
        beta2: noise.beta2,
        mu1: choice.mu1_star,
        ..cfg.model.clone()
    };

    let rows = covariance_comparison(&model, &source)?;
    manifest.timings_seconds.insert("calibrate".into(), start.elapsed().as_secs_f64());

    write_json(
        &out.join("calibration.json"),
        &CalibrationFile {
            format: "diffest-calibration v1".into(),
            noise,
            mu1_star: choice.mu1_star,
            model,
        },
    )?;
    write_table(
        &out.join("hyperdiffusion_curve.csv"),
        "hyperdiffusion-curve",
        "expected squared temperature error versus mu1",
        &["mu1", "expected_error"],
        choice.curve.iter().map(|(m, e)| vec![num(*m), num(*e)]),
    )?;
    write_table(
        &out.join("covariance_comparison.csv"),
        "covariance-comparison",
        "per-mode stationary variance from the Lyapunov solve and the quasistationary formula",
        &["block", "k", "lyapunov", "quasistationary", "rel_diff"],
        rows,
    )?;
    for f in ["calibration.json", "hyperdiffusion_curve.csv", "covariance_comparison.csv"] {
        manifest.add_file(out, f)?;
    }
    manifest.write(out)
}

/// Lyapunov variances about the steady state of `κ₀` versus `Q_k / (2λ_k)`.
fn covariance_comparison(model: &ModelConfig, source: &SpectralField) -> CliResult<Vec<Vec<String>>> {
    let n = model.n_modes;
    let k0 = model.kappa0;
    let steady = source.map_modes(|k, v| {
        let k2 = (k * k) as f64;
        if k == 0 {
            v * 0.0
        } else {
            v / (k0 * k2 + model.mu1 * k2 * k2)
        }
    });
    let flux = steady.derivative().scaled(k0);
    let (f, q) = continuous_generator(model, &SpectralField::constant(n, k0), &flux)?;
    let stat = lyapunov_stationary(&f, &q)?;
    let c = &stat.c0;
    let mut rows = Vec::new();
    for (block, theta) in [("T", false), ("theta", true)] {
        for k in 1..=n {
            let re = reduced_index(n, theta, k, false);
            let im = reduced_index(n, theta, k, true);
            let lyap = c[(re, re)] + c[(im, im)];
            let k2 = (k * k) as f64;
            let formula = if theta {
                model.theta_noise_rate(k as i64) / (2.0 * model.mu2 * k2)
            } else {
                model.temperature_noise_rate(k as i64) / (2.0 * (k0 * k2 + model.mu1 * k2 * k2))
            };
            rows.push(vec![
                block.to_owned(),
                k.to_string(),
                num(lyap),
                num(formula),
                num((lyap - formula).abs() / formula),
            ]);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Sigma,
    M,
    Mu1,
    Mu2,
    MeasureEvery,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let spec: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if spec.values.is_empty() {
            return Err(CliError::Config("sweep `values` is empty".into()));
        }
        Ok(spec)
    }

    fn label(&self, value: f64) -> String {
        let name = serde_json::to_value(self.parameter)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        format!("{name}={value}")
    }

    fn apply(&self, base: &ExperimentConfig, value: f64) -> CliResult<ExperimentConfig> {
        let mut cfg = base.clone();
        let as_count = |v: f64| -> CliResult<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Config(format!("sweep value {v} must be a positive integer")))
            }
        };
        match self.parameter {
            SweepParameter::Sigma => cfg.model.sensor_sigmas = vec![value; cfg.model.n_sensors()],
            SweepParameter::M => {
                let m = as_count(value)?;
                let sigma = cfg.model.sensor_sigmas.first().copied().unwrap_or(value);
                cfg.model.sensor_locations = ModelConfig::uniform_sensors(m);
                cfg.model.sensor_sigmas = vec![sigma; m];
            }
            SweepParameter::Mu1 => cfg.model.mu1 = value,
            SweepParameter::Mu2 => cfg.model.mu2 = value,
            SweepParameter::MeasureEvery => cfg.measure_every = as_count(value)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Values sorted so that the error is expected not to increase, if such an
    /// order exists for the parameter.
    fn expected_order(&self) -> Option<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        match self.parameter {
            SweepParameter::M => idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b])),
            SweepParameter::Sigma | SweepParameter::MeasureEvery => {
                idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]))
            }
            _ => return None,
        }
        Some(idx)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub label: String,
    pub summary: EstimateSummary,
    pub violation: bool,
}

pub fn cmd_sweep(cfg: &ExperimentConfig, spec: &SweepSpec, out: &Path) -> CliResult<Vec<SweepRow>> {
    ensure_dir(out)?;
    let variants: Vec<ExperimentConfig> = spec
        .values
        .iter()
        .map(|&v| spec.apply(cfg, v))
        .collect::<CliResult<_>>()?;
    let mut manifest = Manifest::new("sweep", cfg);
    let start = Instant::now();
    let truth = simulate_twin(cfg)?;
    write_truth(out, cfg, &truth)?;

    let results: Vec<CliResult<EstimateSummary>> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .zip(&spec.values)
            .map(|(variant, &value)| {
                let dir = out.join(spec.label(value));
                let truth = &truth;
                scope.spawn(move || -> CliResult<EstimateSummary> {
                    ensure_dir(&dir)?;
                    let ms = synthesize_measurements(
                        truth,
                        &variant.model,
                        variant.measure_every,
                        variant.measurement_seed(),
                    )?;
                    write_measurements(&dir.join(MEASUREMENTS), &ms)?;
                    estimate(variant, &ms, Some(truth), &dir)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Divergence("sweep worker panicked".into()))))
            .collect()
    });
    let summaries: Vec<EstimateSummary> = results.into_iter().collect::<CliResult<_>>()?;
    manifest.timings_seconds.insert("sweep".into(), start.elapsed().as_secs_f64());

    let mut rows: Vec<SweepRow> = spec
        .values
        .iter()
        .zip(summaries)
        .map(|(&value, summary)| SweepRow {
            value,
            label: spec.label(value),
            summary,
            violation: false,
        })
        .collect();
    if let Some(order) = spec.expected_order() {
        for pair in order.windows(2) {
            let prev = rows[pair[0]].summary.final_kappa_error.unwrap_or(f64::NAN);
            let next = rows[pair[1]].summary.final_kappa_error.unwrap_or(f64::NAN);
            if next > prev {
                rows[pair[1]].violation = true;
                warn!(
                    "κ error increased from {prev:.4} ({}) to {next:.4} ({})",
                    rows[pair[0]].label,
                    rows[pair[1]].label
                );
            }
        }
    }

    write_table(
        &out.join("sweep.csv"),
        "sweep",
        "final kappa error per sweep value; violation marks an error increase along the expected order",
        &["value", "final_kappa_error", "best_iteration", "iterations", "converged", "diverged", "violation"],
        rows.iter().map(|r| {
            vec![
                num(r.value),
                r.summary.final_kappa_error.map(num).unwrap_or_default(),
                r.summary.best_iteration.to_string(),
                r.summary.iterations.to_string(),
                r.summary.converged.to_string(),
                r.summary.diverged.to_string(),
                r.violation.to_string(),
            ]
        }),
    )?;
    manifest.seeds.insert("truth".into(), cfg.truth_seed());
    for (variant, row) in variants.iter().zip(&rows) {
        manifest
            .seeds
            .insert(format!("measurements/{}", row.label), variant.measurement_seed());
    }
    let mut files = vec![TRUTH_MODES.to_owned(), TRUTH_GRID.to_owned(), "sweep.csv".to_owned()];
    for row in &rows {
        files.push(format!("{}/{MEASUREMENTS}", row.label));
        files.push(format!("{}/manifest.json", row.label));
    }
    for f in &files {
        manifest.add_file(out, f)?;
    }
    let convergence: BTreeMap<String, &EstimateSummary> =
        rows.iter().map(|r| (r.label.clone(), &r.summary)).collect();
    manifest.convergence = serde_json::to_value(convergence).ok();
    manifest.write(out)?;
    Ok(rows)
}
