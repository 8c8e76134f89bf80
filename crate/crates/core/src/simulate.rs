//! Synthetic truth trajectories and sensor measurements for twin experiments.
//!
//! The truth log-diffusivity is `θ(x,t) = ln κ_true(x,t) + θ̃(x,t)` where `θ̃`
//! follows the Ornstein-Uhlenbeck Cayley step driven by `w2`. The temperature
//! advances with the semi-implicit step using the full diffusivity
//! `exp(θ)` at the step midpoint.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::spectral::{collocation_points, exp_diffusivity, to_spectral, SpectralField};

/// Mode magnitude beyond which a run is declared unstable.
pub const INSTABILITY_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct TruthTrajectory {
    pub times: Vec<f64>,
    pub temperature: Vec<SpectralField>,
    /// Total log-diffusivity `ln κ`.
    pub theta: Vec<SpectralField>,
    pub seed: u64,
}

impl TruthTrajectory {
    pub fn n_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    /// True diffusivity on the collocation grid at step `i`.
    pub fn kappa_physical(&self, i: usize) -> Result<Vec<f64>> {
        Ok(self.theta[i].to_physical()?.into_iter().map(f64::exp).collect())
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub times: Vec<f64>,
    /// Step index of each measurement column.
    pub steps: Vec<usize>,
    /// `m × n_meas`, column `j` taken at `steps[j]`.
    pub values: DMatrix<f64>,
    pub sensor_locations: Vec<f64>,
    pub sensor_sigmas: Vec<f64>,
}

impl MeasurementSet {
    pub fn n_measurements(&self) -> usize {
        self.steps.len()
    }

    /// Per-stage observation slots for a window of `n_steps` stages: slot `i`
    /// holds the observation at time `i + 1`, if any.
    pub fn stage_slots(&self, n_steps: usize) -> Vec<Option<DVector<f64>>> {
        let mut slots = vec![None; n_steps];
        for (j, &step) in self.steps.iter().enumerate() {
            if step >= 1 && step <= n_steps {
                slots[step - 1] = Some(self.values.column(j).into_owned());
            }
        }
        slots
    }
}

/// Optional overrides for [`simulate_truth_with`].
#[derive(Debug, Clone, Default)]
pub struct TruthOptions {
    pub initial_temperature: Option<SpectralField>,
    /// Initial log-diffusivity fluctuation `θ̃(0)`.
    pub initial_theta: Option<SpectralField>,
    /// Substeps per recorded step; values above 1 run the truth at `dt / r`.
    pub refinement: usize,
}

/// Simulates the truth from `T(0) = 0`, `θ̃(0) = 0` at the estimator resolution.
pub fn simulate_truth(
    config: &ModelConfig,
    true_kappa: &dyn Fn(f64, f64) -> f64,
    source: &dyn Fn(f64, f64) -> f64,
    seed: u64,
) -> Result<TruthTrajectory> {
    simulate_truth_with(config, true_kappa, source, seed, &TruthOptions::default())
}

fn sample_field(n: usize, rng: &mut ChaCha8Rng, scale: impl Fn(i64) -> f64) -> SpectralField {
    let mut out = SpectralField::zeros(n);
    let z0: f64 = StandardNormal.sample(rng);
    out.set_mode(0, Complex64::new(z0 * scale(0).sqrt(), 0.0));
    for k in 1..=n as i64 {
        let sd = (0.5 * scale(k)).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        out.set_mode(k, Complex64::new(re * sd, im * sd));
    }
    out
}

fn grid_field(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<SpectralField> {
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    to_spectral(&values)
}

pub fn simulate_truth_with(
    config: &ModelConfig,
    true_kappa: &dyn Fn(f64, f64) -> f64,
    source: &dyn Fn(f64, f64) -> f64,
    seed: u64,
    options: &TruthOptions,
) -> Result<TruthTrajectory> {
    config.validate()?;
    let n = config.n_modes;
    let ni = n as i64;
    let refine = options.refinement.max(1);
    let h = config.dt / refine as f64;
    let grid = collocation_points(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut temp = match &options.initial_temperature {
        Some(t) if t.n_modes() == n => t.clone(),
        Some(_) => return Err(Error::Dimension("initial temperature has the wrong N_T".into())),
        None => SpectralField::zeros(n),
    };
    let mut fluct = match &options.initial_theta {
        Some(t) if t.n_modes() == n => t.clone(),
        Some(_) => return Err(Error::Dimension("initial theta has the wrong N_T".into())),
        None => SpectralField::zeros(n),
    };

    let log_kappa = |t: f64| -> Result<Vec<f64>> {
        grid.iter()
            .enumerate()
            .map(|(index, &x)| {
                let value = true_kappa(x, t);
                if value > 0.0 && value.is_finite() {
                    Ok(value.ln())
                } else {
                    Err(Error::Domain { index, value })
                }
            })
            .collect()
    };
    let total_theta = |t: f64, fluct: &SpectralField| -> Result<SpectralField> {
        let base = to_spectral(&log_kappa(t)?)?;
        Ok(base.add(fluct))
    };

    let mut d = vec![0.0; 2 * n + 1];
    let mut f = vec![0.0; 2 * n + 1];
    let mut decay = vec![0.0; 2 * n + 1];
    let mut inv_den = vec![0.0; 2 * n + 1];
    for k in -ni..=ni {
        let i = (k + ni) as usize;
        let k2 = (k * k) as f64;
        let stiff = 0.5 * h * (config.kappa0 * k2 + config.mu1 * k2 * k2);
        d[i] = 1.0 + stiff;
        f[i] = (1.0 - stiff) / d[i];
        let a = 0.5 * h * config.mu2 * k2;
        decay[i] = (1.0 - a) / (1.0 + a);
        inv_den[i] = 1.0 / (1.0 + a);
    }

    let mut times = Vec::with_capacity(config.n_steps + 1);
    let mut temperature = Vec::with_capacity(config.n_steps + 1);
    let mut theta = Vec::with_capacity(config.n_steps + 1);
    times.push(0.0);
    temperature.push(temp.clone());
    theta.push(total_theta(0.0, &fluct)?);

    for step in 0..config.n_steps {
        for sub in 0..refine {
            let t = step as f64 * config.dt + sub as f64 * h;
            let t_mid = t + 0.5 * h;

            let w2 = sample_field(n, &mut rng, |k| config.theta_noise_rate(k) * h);
            let next_fluct = fluct.map_modes(|k, v| {
                let i = (k + ni) as usize;
                v * decay[i] + w2.coeff(k) * inv_den[i]
            });

            let mid_fluct = fluct.add(&next_fluct).scaled(0.5);
            let lk = log_kappa(t_mid)?;
            let mid_phys = mid_fluct.to_physical()?;
            let kappa_vals: Vec<f64> = lk.iter().zip(&mid_phys).map(|(a, b)| (a + b).exp()).collect();
            let kappa = to_spectral(&kappa_vals)?;
            let src = grid_field(&grid, |x| source(x, t_mid))?;
            let w = sample_field(n, &mut rng, |k| config.temperature_noise_rate(k) * h);

            let rem = kappa.coeff(0).re - config.kappa0;
            let mut next = SpectralField::zeros(n);
            for k in 0..=ni {
                let i = (k + ni) as usize;
                let mut v = temp.coeff(k) * f[i];
                for kp in -ni..=ni {
                    let j = (kp + ni) as usize;
                    let kap = if kp == k {
                        Complex64::new(rem, 0.0)
                    } else {
                        kappa.coeff(k - kp)
                    };
                    let g = kap * ((k * kp) as f64 * 0.5 * h * (1.0 + 1.0 / (d[i] * d[j])));
                    v -= g * temp.coeff(kp);
                }
                v += (src.coeff(k) * h + w.coeff(k)) / d[i];
                if k == 0 {
                    v.im = 0.0;
                }
                next.set_mode(k, v);
            }
            let magnitude = next.max_abs_coeff();
            if !(magnitude <= INSTABILITY_THRESHOLD) {
                return Err(Error::Unstable {
                    step: step + 1,
                    magnitude,
                });
            }
            temp = next;
            fluct = next_fluct;
        }
        let t = (step + 1) as f64 * config.dt;
        times.push(t);
        temperature.push(temp.clone());
        theta.push(total_theta(t, &fluct)?);
    }
    Ok(TruthTrajectory {
        times,
        temperature,
        theta,
        seed,
    })
}

/// Samples `y_ℓ = T(x_ℓ, t_i) + ε` at steps `measure_every, 2·measure_every, …`.
pub fn synthesize_measurements(
    truth: &TruthTrajectory,
    config: &ModelConfig,
    measure_every: usize,
    seed: u64,
) -> Result<MeasurementSet> {
    if measure_every == 0 {
        return Err(Error::Config("measure_every must be at least 1".into()));
    }
    let m = config.n_sensors();
    let steps: Vec<usize> = (1..=truth.n_steps())
        .filter(|s| s % measure_every == 0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(m, steps.len());
    for (j, &step) in steps.iter().enumerate() {
        let field = &truth.temperature[step];
        for (l, (&x, &sigma)) in config
            .sensor_locations
            .iter()
            .zip(&config.sensor_sigmas)
            .enumerate()
        {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[(l, j)] = field.eval(x) + sigma * z;
        }
    }
    Ok(MeasurementSet {
        times: steps.iter().map(|&s| truth.times[s]).collect(),
        steps,
        values,
        sensor_locations: config.sensor_locations.clone(),
        sensor_sigmas: config.sensor_sigmas.clone(),
    })
}

/// `exp` of the truth log-diffusivity at step `i` as a spectral field.
pub fn truth_kappa(truth: &TruthTrajectory, i: usize) -> Result<SpectralField> {
    exp_diffusivity(&truth.theta[i])
}
