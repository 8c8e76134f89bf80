//! Outer quasilinear iteration on the mean fields.
//!
//! Each pass linearizes the dynamics about the current means `(T̄, θ̄, Γ̄)`,
//! runs the fixed-interval smoother, forms the nonlinear flux of the smoothed
//! state, time-averages it per mode, evolves `T̄` with the averaged flux
//! divergence and recovers `κ̄ = exp θ̄` from `Γ̄ = κ̄ ∂ₓT̄`.

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::calibration::{default_initialization, InitialState};
use crate::error::{Error, Result};
use crate::kalman::{smooth, LinearStageModel, ObjectiveBreakdown, SmootherResult};
use crate::model::{assemble_stage_with_measurement, build_measurement, build_transition, ModelConfig};
use crate::simulate::{MeasurementSet, TruthTrajectory, INSTABILITY_THRESHOLD};
use crate::spectral::{collocation_points, exp_diffusivity, to_spectral, SpectralField};

/// Lower bound on the recovered diffusivity relative to κ₀.
pub const KAPPA_FLOOR_FACTOR: f64 = 1e-6;
/// Tikhonov weight of the κ̄ recovery relative to `max |∂ₓT̄|²`.
pub const RECOVERY_REGULARIZATION: f64 = 1e-3;
/// Default kernel duration in units of `1/(κ̄₀ k²)`.
pub const DEFAULT_KERNEL_SCALE: f64 = 4.0;
/// Objective increases in a row that count as divergence.
pub const DIVERGENCE_STREAK: usize = 3;

/// Source term sampled at `t = 0` and at every step midpoint.
#[derive(Debug, Clone)]
pub struct SourceSchedule {
    pub initial: SpectralField,
    /// `midpoints[i]` is the source at `(i + ½) dt`.
    pub midpoints: Vec<SpectralField>,
}

impl SourceSchedule {
    pub fn from_fn(config: &ModelConfig, source: &dyn Fn(f64, f64) -> f64) -> Result<Self> {
        let grid = collocation_points(config.n_modes);
        let sample = |t: f64| {
            let values: Vec<f64> = grid.iter().map(|&x| source(x, t)).collect();
            to_spectral(&values)
        };
        let midpoints = (0..config.n_steps)
            .map(|i| sample((i as f64 + 0.5) * config.dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            initial: sample(0.0)?,
            midpoints,
        })
    }

    pub fn constant(field: SpectralField, n_steps: usize) -> Self {
        Self {
            midpoints: vec![field.clone(); n_steps],
            initial: field,
        }
    }
}

/// Mean fields of one outer iterate at times `0..=N_f`.
#[derive(Debug, Clone)]
pub struct MeanTrajectory {
    pub t_bar: Vec<SpectralField>,
    pub theta_bar: Vec<SpectralField>,
    pub flux_bar: Vec<SpectralField>,
    pub iteration: usize,
}

impl MeanTrajectory {
    pub fn len(&self) -> usize {
        self.t_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_bar.is_empty()
    }

    pub fn kappa_bar(&self, i: usize) -> Result<SpectralField> {
        exp_diffusivity(&self.theta_bar[i])
    }

    pub fn kappa_physical(&self, i: usize) -> Result<Vec<f64>> {
        Ok(self.theta_bar[i].to_physical()?.into_iter().map(f64::exp).collect())
    }
}

/// Per-mode symmetric time window. Entry `k` serves modes `±k`.
#[derive(Debug, Clone)]
pub struct SmoothingKernel {
    pub half_width_steps: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
}

fn hann_weights(half_width: usize) -> Vec<f64> {
    let h = half_width as f64 + 1.0;
    let raw: Vec<f64> = (-(half_width as i64)..=half_width as i64)
        .map(|j| 0.5 * (1.0 + (std::f64::consts::PI * j as f64 / h).cos()))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

impl SmoothingKernel {
    /// Hann windows of duration `scale / (κ̄₀ k²)` clamped to `[3 dt, N_f dt / 3]`.
    pub fn new(n_modes: usize, kappa_mean: f64, dt: f64, n_steps: usize, scale: f64) -> Self {
        let lo = 3.0 * dt;
        let hi = (n_steps as f64 * dt / 3.0).max(lo);
        let mut half_width_steps = Vec::with_capacity(n_modes + 1);
        let mut weights = Vec::with_capacity(n_modes + 1);
        for k in 0..=n_modes {
            let duration = if k == 0 {
                hi
            } else {
                (scale / (kappa_mean * (k * k) as f64)).clamp(lo, hi)
            };
            let hw = ((0.5 * duration / dt).round() as usize).max(1);
            half_width_steps.push(hw);
            weights.push(hann_weights(hw));
        }
        Self {
            half_width_steps,
            weights,
        }
    }

    /// Window-averages a scalar series with mode-`k` weights; the window is
    /// truncated and renormalized at the ends of the series.
    pub fn apply(&self, k: usize, series: &[Complex64]) -> Vec<Complex64> {
        let hw = self.half_width_steps[k] as i64;
        let w = &self.weights[k];
        let n = series.len() as i64;
        (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut norm = 0.0;
                for j in -hw..=hw {
                    let t = i + j;
                    if t >= 0 && t < n {
                        let wj = w[(j + hw) as usize];
                        acc += series[t as usize] * wj;
                        norm += wj;
                    }
                }
                acc / norm
            })
            .collect()
    }

    /// Applies the per-mode window to a time series of fields.
    pub fn smooth_fields(&self, fields: &[SpectralField]) -> Vec<SpectralField> {
        if fields.is_empty() {
            return Vec::new();
        }
        let n = fields[0].n_modes();
        let mut out: Vec<SpectralField> = vec![SpectralField::zeros(n); fields.len()];
        for k in 0..=n as i64 {
            let series: Vec<Complex64> = fields.iter().map(|f| f.coeff(k)).collect();
            for (slot, v) in out.iter_mut().zip(self.apply(k as usize, &series)) {
                slot.set_mode(k, v);
            }
        }
        out
    }
}

fn state_blocks(n: usize, u: &DVector<f64>) -> (SpectralField, SpectralField) {
    let len = 2 * n + 1;
    (
        SpectralField::unpack(n, &u.as_slice()[..len]),
        SpectralField::unpack(n, &u.as_slice()[len..]),
    )
}

/// Heat flux `Γ̂ = exp(θ̄ + θ̃̂) ∂ₓT̂` of the smoothed state at every step.
pub fn estimate_flux(smoothed: &SmootherResult, means: &MeanTrajectory) -> Result<Vec<SpectralField>> {
    if smoothed.beliefs.len() != means.len() {
        return Err(Error::Dimension(format!(
            "{} smoothed states but {} mean steps",
            smoothed.beliefs.len(),
            means.len()
        )));
    }
    let n = means.t_bar[0].n_modes();
    smoothed
        .beliefs
        .iter()
        .zip(&means.theta_bar)
        .map(|(b, theta_bar)| {
            let (temp, theta) = state_blocks(n, &b.mean);
            let kappa = exp_diffusivity(&theta_bar.add(&theta))?;
            flux_of(&kappa, &temp)
        })
        .collect()
}

/// `κ ∂ₓT` for band-limited `κ` and `T`, truncated to `N` modes.
pub fn flux_of(kappa: &SpectralField, temperature: &SpectralField) -> Result<SpectralField> {
    kappa.dealiased_product(&temperature.derivative())
}

/// Kernel time average of the flux.
pub fn average_flux(flux_hats: &[SpectralField], kernel: &SmoothingKernel) -> Vec<SpectralField> {
    kernel.smooth_fields(flux_hats)
}

/// `∂ₓ` of the kernel-averaged flux.
pub fn average_flux_divergence(flux_hats: &[SpectralField], kernel: &SmoothingKernel) -> Vec<SpectralField> {
    average_flux(flux_hats, kernel)
        .iter()
        .map(SpectralField::derivative)
        .collect()
}

/// Advances `∂ₜT̄ = D − μ₁∂ₓ⁴T̄ + S` with the hyperdiffusion implicit and the
/// flux divergence `D` and source explicit at the step midpoint.
pub fn evolve_mean_temperature(
    div_flux_bar: &[SpectralField],
    config: &ModelConfig,
    source: &SourceSchedule,
    t_bar_initial: &SpectralField,
) -> Result<Vec<SpectralField>> {
    let nf = source.midpoints.len();
    if div_flux_bar.len() != nf + 1 {
        return Err(Error::Dimension(format!(
            "{} divergence fields for {} steps",
            div_flux_bar.len(),
            nf
        )));
    }
    let dt = config.dt;
    let mut out = Vec::with_capacity(nf + 1);
    out.push(t_bar_initial.clone());
    for i in 0..nf {
        let prev = &out[i];
        let next = prev.map_modes(|k, t| {
            let hyper = 0.5 * dt * config.mu1 * (k * k * k * k) as f64;
            let d_mid = 0.5 * (div_flux_bar[i].coeff(k) + div_flux_bar[i + 1].coeff(k));
            (t * (1.0 - hyper) + (d_mid + source.midpoints[i].coeff(k)) * dt) / (1.0 + hyper)
        });
        let magnitude = next.max_abs_coeff();
        if !(magnitude <= INSTABILITY_THRESHOLD) {
            return Err(Error::Unstable {
                step: i + 1,
                magnitude,
            });
        }
        out.push(next);
    }
    Ok(out)
}

/// Largest per-step residual of the discrete mean-temperature equation.
pub fn mean_equation_residual(
    t_bar: &[SpectralField],
    div_flux_bar: &[SpectralField],
    config: &ModelConfig,
    source: &SourceSchedule,
) -> f64 {
    let dt = config.dt;
    let mut worst: f64 = 0.0;
    for i in 0..source.midpoints.len() {
        for k in -(t_bar[i].n_modes() as i64)..=t_bar[i].n_modes() as i64 {
            let hyper = 0.5 * dt * config.mu1 * (k * k * k * k) as f64;
            let d_mid = 0.5 * (div_flux_bar[i].coeff(k) + div_flux_bar[i + 1].coeff(k));
            let r = t_bar[i + 1].coeff(k) * (1.0 + hyper)
                - t_bar[i].coeff(k) * (1.0 - hyper)
                - (d_mid + source.midpoints[i].coeff(k)) * dt;
            worst = worst.max(r.norm());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct KappaRecovery {
    pub kappa: Vec<SpectralField>,
    pub theta: Vec<SpectralField>,
    /// Grid values raised to the floor, summed over all steps.
    pub floored_points: usize,
    /// Steps where `∂ₓT̄ ≡ 0` and the previous κ̄ was kept.
    pub degenerate_steps: Vec<usize>,
}

/// Regularized pointwise solution of `κ̄ ∂ₓT̄ = Γ̄`:
/// `κ̄ = (Γ̄ ∂ₓT̄ + η κ_prev) / ((∂ₓT̄)² + η)` with `η = 10⁻³ max (∂ₓT̄)²`,
/// floored at `kappa_floor`.
pub fn recover_kappa(
    t_bar: &[SpectralField],
    flux_bar: &[SpectralField],
    previous_kappa: &[SpectralField],
    kappa_floor: f64,
) -> Result<KappaRecovery> {
    if t_bar.len() != flux_bar.len() || t_bar.len() != previous_kappa.len() {
        return Err(Error::Dimension("κ̄ recovery inputs are not aligned".into()));
    }
    let mut out = KappaRecovery {
        kappa: Vec::with_capacity(t_bar.len()),
        theta: Vec::with_capacity(t_bar.len()),
        floored_points: 0,
        degenerate_steps: Vec::new(),
    };
    for (i, ((t, g), prev)) in t_bar.iter().zip(flux_bar).zip(previous_kappa).enumerate() {
        let grad = t.derivative().to_physical()?;
        let flux = g.to_physical()?;
        let kp = prev.to_physical()?;
        let max_sq = grad.iter().map(|v| v * v).fold(0.0, f64::max);
        let values: Vec<f64> = if max_sq <= f64::MIN_POSITIVE {
            warn!("∂ₓT̄ vanishes at step {i}; keeping the previous κ̄");
            out.degenerate_steps.push(i);
            kp.clone()
        } else {
            let eta = RECOVERY_REGULARIZATION * max_sq;
            grad.iter()
                .zip(&flux)
                .zip(&kp)
                .map(|((d, f), p)| (f * d + eta * p) / (d * d + eta))
                .collect()
        };
        let floored: Vec<f64> = values
            .into_iter()
            .map(|v| {
                if v < kappa_floor || !v.is_finite() {
                    out.floored_points += 1;
                    kappa_floor
                } else {
                    v
                }
            })
            .collect();
        let logs: Vec<f64> = floored.iter().map(|v| v.ln()).collect();
        let mut theta = to_spectral(&logs)?;
        // Transform round-off can leave a floored value a few ulps under the floor.
        let log_floor = kappa_floor.ln();
        let deficit = theta
            .to_physical()?
            .iter()
            .map(|v| log_floor - v)
            .fold(0.0, f64::max);
        if deficit > 0.0 {
            let c0 = theta.coeff(0);
            theta.set_mode(0, c0 + 2.0 * deficit);
        }
        out.kappa.push(to_spectral(&floored)?);
        out.theta.push(theta);
    }
    if out.floored_points > 0 {
        warn!("{} grid values of κ̄ raised to the floor", out.floored_points);
    }
    Ok(out)
}

/// `θ̄ + K * θ̃̂`, the additive mean update kept as a diagnostic.
pub fn update_theta_mean(
    theta_bar: &[SpectralField],
    smoothed_theta: &[SpectralField],
    kernel: &SmoothingKernel,
) -> Result<Vec<SpectralField>> {
    if theta_bar.len() != smoothed_theta.len() {
        return Err(Error::Dimension("θ̄ and θ̃̂ are not aligned".into()));
    }
    Ok(theta_bar
        .iter()
        .zip(kernel.smooth_fields(smoothed_theta))
        .map(|(a, b)| a.add(&b))
        .collect())
}

/// Linear stages about the given means; stage `i` uses the mean fields
/// averaged over its endpoints and the source at its midpoint.
pub fn build_stages(
    config: &ModelConfig,
    means: &MeanTrajectory,
    source: &SourceSchedule,
) -> Result<Vec<LinearStageModel>> {
    let nf = source.midpoints.len();
    if means.len() != nf + 1 {
        return Err(Error::Dimension(format!(
            "means cover {} times, source {} steps",
            means.len(),
            nf
        )));
    }
    let (h, r) = build_measurement(config);
    let kappas = (0..=nf).map(|i| means.kappa_bar(i)).collect::<Result<Vec<_>>>()?;
    (0..nf)
        .map(|i| {
            let kappa = kappas[i].add(&kappas[i + 1]).scaled(0.5);
            let flux = means.flux_bar[i].add(&means.flux_bar[i + 1]).scaled(0.5);
            let ops = build_transition(config, &kappa, &flux)?;
            assemble_stage_with_measurement(&ops, config, &source.midpoints[i], h.clone(), r.clone())
        })
        .collect()
}

fn check_measurements(config: &ModelConfig, measurements: &MeasurementSet) -> Result<()> {
    if measurements.values.nrows() != config.n_sensors() {
        return Err(Error::Dimension(format!(
            "measurements have {} rows for {} sensors",
            measurements.values.nrows(),
            config.n_sensors()
        )));
    }
    if let Some(&bad) = measurements.steps.iter().find(|&&s| s == 0 || s > config.n_steps) {
        return Err(Error::Dimension(format!(
            "measurement at step {bad} lies outside 1..={}",
            config.n_steps
        )));
    }
    if measurements.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("measurements contain non-finite values".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct IterationOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub kernel_scale: f64,
    /// Prior and initial κ̄; defaults to [`default_initialization`].
    pub initial: Option<InitialState>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            max_iters: 10,
            tol: 1e-4,
            kernel_scale: DEFAULT_KERNEL_SCALE,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: ObjectiveBreakdown,
    /// Relative space-time change of `(T̄, θ̄)` produced by the update that
    /// followed this smoother pass (absent for the last pass).
    pub mean_change: Option<f64>,
    /// Relative difference between the additive θ̄ update and the recovered θ̄.
    pub theta_update_gap: Option<f64>,
    pub floored_points: usize,
    pub degenerate_steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub diverged: bool,
    /// Iterate returned as the result.
    pub best_iteration: usize,
}

#[derive(Debug, Clone)]
pub struct OuterIterationResult {
    pub means: MeanTrajectory,
    pub smoothed: SmootherResult,
    pub report: ConvergenceReport,
    /// Every mean iterate, starting from the initialization.
    pub history: Vec<MeanTrajectory>,
}

fn space_time_norm(fields: &[SpectralField]) -> f64 {
    fields
        .iter()
        .flat_map(|f| f.coeffs().iter())
        .map(|c| c.norm_sqr())
        .sum::<f64>()
}

fn space_time_diff(a: &[SpectralField], b: &[SpectralField]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.coeffs().iter().zip(y.coeffs()))
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
}

/// Relative space-time L2 change of `(T̄, θ̄)` between iterates.
pub fn relative_mean_change(new: &MeanTrajectory, old: &MeanTrajectory) -> f64 {
    let num = space_time_diff(&new.t_bar, &old.t_bar) + space_time_diff(&new.theta_bar, &old.theta_bar);
    let den = space_time_norm(&old.t_bar) + space_time_norm(&old.theta_bar);
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Deterministic propagation `u_{i+1} = F_i u_i + s_i`.
fn propagate(stages: &[LinearStageModel], u0: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(stages.len() + 1);
    out.push(u0.clone());
    for stage in stages {
        let next = &stage.f * out.last().expect("nonempty") + &stage.s;
        out.push(next);
    }
    out
}

/// Initial means: `θ̄ = ln κ̄₀`, `T̄` from the deterministic linear model about
/// `κ̄₀` started at the prior mean, and `Γ̄ = κ̄₀ ∂ₓT̄`.
pub fn initial_means(config: &ModelConfig, source: &SourceSchedule, initial: &InitialState) -> Result<MeanTrajectory> {
    let n = config.n_modes;
    let nf = source.midpoints.len();
    let theta0 = crate::spectral::log_diffusivity(&initial.kappa)?;
    let zero_flux = MeanTrajectory {
        t_bar: vec![SpectralField::zeros(n); nf + 1],
        theta_bar: vec![theta0.clone(); nf + 1],
        flux_bar: vec![SpectralField::zeros(n); nf + 1],
        iteration: 0,
    };
    let stages = build_stages(config, &zero_flux, source)?;
    let states = propagate(&stages, &initial.prior.mean);
    let t_bar: Vec<SpectralField> = states.iter().map(|u| state_blocks(n, u).0).collect();
    let flux_bar = t_bar
        .iter()
        .map(|t| flux_of(&initial.kappa, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanTrajectory {
        t_bar,
        theta_bar: vec![theta0; nf + 1],
        flux_bar,
        iteration: 0,
    })
}

/// Runs the outer loop until the relative change of the means drops below
/// `tol`, `max_iters` updates have been made, or the objective increases
/// [`DIVERGENCE_STREAK`] times in a row. A smoother pass about the returned
/// means is always included.
pub fn run_outer_iteration(
    config: &ModelConfig,
    measurements: &MeasurementSet,
    source: &SourceSchedule,
    options: &IterationOptions,
) -> Result<OuterIterationResult> {
    config.validate()?;
    check_measurements(config, measurements)?;
    if source.midpoints.len() != config.n_steps {
        return Err(Error::Dimension(format!(
            "source covers {} steps, config has {}",
            source.midpoints.len(),
            config.n_steps
        )));
    }
    let initial = match &options.initial {
        Some(init) => init.clone(),
        None => default_initialization(config, &source.initial)?,
    };
    let n = config.n_modes;
    let slots = measurements.stage_slots(config.n_steps);
    let kappa_floor = KAPPA_FLOOR_FACTOR * config.kappa0;

    let mut means = initial_means(config, source, &initial)?;
    let mut history = vec![means.clone()];
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(f64, usize, SmootherResult)> = None;
    let mut streak = 0;
    let mut converged = false;
    let mut diverged = false;

    let final_smoothed = loop {
        let stages = build_stages(config, &means, source)?;
        let smoothed = smooth(&stages, &slots, &initial.prior)?;
        let total = smoothed.objective.total;
        if let Some(prev) = records.last() {
            if total > prev.objective.total {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        records.push(IterationRecord {
            iteration: means.iteration,
            objective: smoothed.objective.clone(),
            mean_change: None,
            theta_update_gap: None,
            floored_points: 0,
            degenerate_steps: 0,
        });
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, means.iteration, smoothed.clone()));
        }
        if streak >= DIVERGENCE_STREAK {
            diverged = true;
            warn!("objective increased {streak} times in a row; returning the best iterate");
            let (_, idx, sm) = best.take().expect("at least one pass");
            means = history[idx].clone();
            break sm;
        }
        if converged || means.iteration >= options.max_iters {
            break smoothed;
        }

        let kappa_mean = (0..means.len())
            .map(|i| means.kappa_bar(i).map(|k| k.coeff(0).re))
            .sum::<Result<f64>>()?
            / means.len() as f64;
        let kernel = SmoothingKernel::new(n, kappa_mean, config.dt, config.n_steps, options.kernel_scale);
        let flux_hat = estimate_flux(&smoothed, &means)?;
        let flux_bar = average_flux(&flux_hat, &kernel);
        let div: Vec<SpectralField> = flux_bar.iter().map(SpectralField::derivative).collect();
        let t0 = state_blocks(n, &smoothed.beliefs[0].mean).0;
        let t_bar = evolve_mean_temperature(&div, config, source, &t0)?;
        let prev_kappa = (0..means.len())
            .map(|i| means.kappa_bar(i))
            .collect::<Result<Vec<_>>>()?;
        let rec = recover_kappa(&t_bar, &flux_bar, &prev_kappa, kappa_floor)?;

        let theta_hat: Vec<SpectralField> = smoothed
            .beliefs
            .iter()
            .map(|b| state_blocks(n, &b.mean).1)
            .collect();
        let additive = update_theta_mean(&means.theta_bar, &theta_hat, &kernel)?;
        let gap = (space_time_diff(&additive, &rec.theta) / space_time_norm(&rec.theta).max(f64::MIN_POSITIVE)).sqrt();

        let next = MeanTrajectory {
            t_bar,
            theta_bar: rec.theta,
            flux_bar,
            iteration: means.iteration + 1,
        };
        let change = relative_mean_change(&next, &means);
        let record = records.last_mut().expect("pushed above");
        record.mean_change = Some(change);
        record.theta_update_gap = Some(gap);
        record.floored_points = rec.floored_points;
        record.degenerate_steps = rec.degenerate_steps.len();
        log::info!(
            "iteration {}: objective {:.6e}, mean change {:.3e}",
            means.iteration,
            total,
            change
        );
        converged = change < options.tol;
        means = next;
        history.push(means.clone());
    };

    let best_iteration = means.iteration;
    Ok(OuterIterationResult {
        means,
        smoothed: final_smoothed,
        report: ConvergenceReport {
            records,
            converged,
            diverged,
            best_iteration,
        },
        history,
    })
}

/// Relative space-time L2 error of `κ̄` against the truth on the collocation grid.
pub fn kappa_relative_error(means: &MeanTrajectory, truth: &TruthTrajectory) -> Result<f64> {
    if means.len() != truth.times.len() {
        return Err(Error::Dimension("means and truth cover different windows".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..means.len() {
        let est = means.kappa_physical(i)?;
        let tru = truth.kappa_physical(i)?;
        for (a, b) in est.iter().zip(&tru) {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    Ok((num / den).sqrt())
}
