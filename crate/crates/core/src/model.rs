//! Discrete operators of the linearized stochastic heat equation.
//!
//! The filter state stacks two real-packed spectral blocks (see
//! [`SpectralField::pack`]): the temperature block `[0, M)` and the
//! log-diffusivity fluctuation block `[M, 2M)`, with `M = 2N_T + 1`.
//!
//! Per mode, the temperature advance is the semi-implicit step
//!
//! ```text
//! T_k' = f_k T_k - Σ_{k'} g_{k,k'} T_{k'} + Σ_{k'} h_{k,k'} θ_{k'}
//!        + Σ_{k'} c_{k,k'} w2_{k'} + (S_k(t + dt/2) dt + w_k) / d_k
//! ```
//!
//! and the log-diffusivity advance is the Cayley step
//! `θ_k' = ((1 - a_k)/(1 + a_k)) θ_k + w2_k/(1 + a_k)` with `a_k = dt μ₂ k²/2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::LinearStageModel;
use crate::spectral::SpectralField;

/// Parameters of the forward model, the noise model, and the sensor array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_modes: usize,
    pub kappa0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub sensor_locations: Vec<f64>,
    pub sensor_sigmas: Vec<f64>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be nonnegative and finite, got {v}")))
            }
        };
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be at least 1".into()));
        }
        positive("kappa0", self.kappa0)?;
        nonneg("mu1", self.mu1)?;
        positive("mu2", self.mu2)?;
        nonneg("alpha1", self.alpha1)?;
        nonneg("alpha2", self.alpha2)?;
        nonneg("beta1", self.beta1)?;
        nonneg("beta2", self.beta2)?;
        positive("dt", self.dt)?;
        if self.sensor_locations.len() != self.sensor_sigmas.len() {
            return Err(Error::Config(format!(
                "sensor_locations has {} entries but sensor_sigmas has {}",
                self.sensor_locations.len(),
                self.sensor_sigmas.len()
            )));
        }
        for (i, &x) in self.sensor_locations.iter().enumerate() {
            if !(-PI..PI).contains(&x) {
                return Err(Error::Config(format!("sensor_locations[{i}] = {x} outside [-pi, pi)")));
            }
            if i > 0 && x <= self.sensor_locations[i - 1] {
                return Err(Error::Config("sensor_locations must be strictly increasing".into()));
            }
        }
        for (i, &s) in self.sensor_sigmas.iter().enumerate() {
            nonneg(&format!("sensor_sigmas[{i}]"), s)?;
        }
        Ok(())
    }

    /// Number of modes per block, `2N_T + 1`.
    pub fn block_len(&self) -> usize {
        2 * self.n_modes + 1
    }

    /// Filter state dimension, `2(2N_T + 1)`.
    pub fn state_dim(&self) -> usize {
        2 * self.block_len()
    }

    pub fn n_sensors(&self) -> usize {
        self.sensor_locations.len()
    }

    /// `dt (κ₀ N² + μ₁ N⁴)`: how stiff the explicit part of the step is.
    pub fn stability_number(&self) -> f64 {
        let n2 = (self.n_modes * self.n_modes) as f64;
        self.dt * (self.kappa0 * n2 + self.mu1 * n2 * n2)
    }

    /// Complex-mode variance of the temperature forcing per unit time, `α₁|k|^-β₁`
    /// (`α₁` at k = 0).
    pub fn temperature_noise_rate(&self, k: i64) -> f64 {
        power_law(self.alpha1, self.beta1, k)
    }

    /// Complex-mode variance of the log-diffusivity forcing per unit time.
    pub fn theta_noise_rate(&self, k: i64) -> f64 {
        power_law(self.alpha2, self.beta2, k)
    }

    /// Uniformly spaced sensors `x_ℓ = π(2ℓ - m - 1)/m`, ℓ = 1..m.
    pub fn uniform_sensors(m: usize) -> Vec<f64> {
        (1..=m)
            .map(|l| PI * (2.0 * l as f64 - m as f64 - 1.0) / m as f64)
            .collect()
    }
}

fn power_law(alpha: f64, beta: f64, k: i64) -> f64 {
    if k == 0 {
        alpha
    } else {
        alpha * (k.unsigned_abs() as f64).powf(-beta)
    }
}

/// Per-mode coefficients of one semi-implicit step about frozen mean fields.
/// Vectors are indexed by `k + N_T`, matrices by `(k + N_T, k' + N_T)`.
#[derive(Debug, Clone)]
pub struct TransitionOperators {
    pub n_modes: usize,
    pub d: Vec<f64>,
    pub f: Vec<f64>,
    /// Temperature coupling through the spatial variation of κ̄. The diagonal
    /// carries the `(κ̄₀ - κ₀)k²` remainder, which vanishes when κ̄ averages to κ₀.
    pub g: DMatrix<Complex64>,
    pub h: DMatrix<Complex64>,
    pub c: DMatrix<Complex64>,
    pub theta_decay: Vec<f64>,
    /// `1 + dt μ₂ k²/2`, the implicit denominator of the θ step.
    pub theta_denominator: Vec<f64>,
}

fn mode_range(n: usize) -> impl Iterator<Item = i64> + Clone {
    let n = n as i64;
    -n..=n
}

/// Builds `d_k`, `f_k`, `g`, `h`, `c` and the θ decay factors.
///
/// `mean_flux` is the mean heat flux κ̄ ∂ₓT̄.
pub fn build_transition(
    config: &ModelConfig,
    mean_kappa: &SpectralField,
    mean_flux: &SpectralField,
) -> Result<TransitionOperators> {
    let n = config.n_modes;
    if mean_kappa.n_modes() != n || mean_flux.n_modes() != n {
        return Err(Error::Dimension(format!(
            "mean fields must have N_T = {n}, got {} and {}",
            mean_kappa.n_modes(),
            mean_flux.n_modes()
        )));
    }
    for (index, &value) in mean_kappa.to_physical()?.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::Domain { index, value });
        }
    }
    mean_flux.check_hermitian()?;

    let half_dt = 0.5 * config.dt;
    let len = 2 * n + 1;
    let mut d = vec![0.0; len];
    let mut f = vec![0.0; len];
    let mut theta_decay = vec![0.0; len];
    let mut theta_denominator = vec![0.0; len];
    for k in mode_range(n) {
        let i = (k + n as i64) as usize;
        let k2 = (k * k) as f64;
        let stiff = half_dt * (config.kappa0 * k2 + config.mu1 * k2 * k2);
        d[i] = 1.0 + stiff;
        f[i] = (1.0 - stiff) / d[i];
        let a = half_dt * config.mu2 * k2;
        theta_denominator[i] = 1.0 + a;
        theta_decay[i] = (1.0 - a) / (1.0 + a);
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut g = DMatrix::from_element(len, len, zero);
    let mut h = DMatrix::from_element(len, len, zero);
    let mut c = DMatrix::from_element(len, len, zero);
    let kappa_rem = mean_kappa.coeff(0).re - config.kappa0;
    for k in mode_range(n) {
        let i = (k + n as i64) as usize;
        for kp in mode_range(n) {
            let j = (kp + n as i64) as usize;
            let kk = (k * kp) as f64;
            let kappa = if k == kp {
                Complex64::new(kappa_rem, 0.0)
            } else {
                mean_kappa.coeff(k - kp)
            };
            g[(i, j)] = kappa * (kk * half_dt * (1.0 + 1.0 / (d[i] * d[j])));
            // ∂ₓ(Γ̄ θ) contributes i k Γ̄_{k-k'} θ_{k'}
            let flux = Complex64::new(0.0, k as f64) * mean_flux.coeff(k - kp);
            h[(i, j)] = flux * (half_dt / d[i] * (1.0 + theta_decay[j]));
            c[(i, j)] = flux * (half_dt / (d[i] * theta_denominator[j]));
        }
    }
    Ok(TransitionOperators {
        n_modes: n,
        d,
        f,
        g,
        h,
        c,
        theta_decay,
        theta_denominator,
    })
}

/// Real matrix acting on packed fields that represents the complex mode map `op`.
pub fn realify(n_modes: usize, op: &DMatrix<Complex64>) -> DMatrix<f64> {
    let len = 2 * n_modes + 1;
    assert_eq!(op.shape(), (len, len));
    let mut out = DMatrix::zeros(len, len);
    let mut unit = vec![0.0; len];
    let mut packed = vec![0.0; len];
    for col in 0..len {
        unit.iter_mut().for_each(|u| *u = 0.0);
        unit[col] = 1.0;
        let field = SpectralField::unpack(n_modes, &unit);
        let input = DVector::from_column_slice(field.coeffs());
        let image = op * input;
        // read back only k >= 0; Hermitian-preserving maps fill k < 0 consistently
        packed[0] = image[n_modes].re;
        for k in 1..=n_modes {
            packed[2 * k - 1] = image[n_modes + k].re;
            packed[2 * k] = image[n_modes + k].im;
        }
        out.column_mut(col).copy_from_slice(&packed);
    }
    out
}

/// Real diagonal matrix scaling each mode k of a packed block by `factor[k + N]`.
fn realify_diagonal(n_modes: usize, factor: &[f64]) -> DMatrix<f64> {
    let len = 2 * n_modes + 1;
    let mut out = DMatrix::zeros(len, len);
    out[(0, 0)] = factor[n_modes];
    for k in 1..=n_modes {
        out[(2 * k - 1, 2 * k - 1)] = factor[n_modes + k];
        out[(2 * k, 2 * k)] = factor[n_modes + k];
    }
    out
}

/// Variance of each packed component for complex-mode variances `rate(k)·scale`.
/// k ≥ 1 modes split their variance equally between real and imaginary parts.
fn packed_variances(n_modes: usize, scale: f64, rate: impl Fn(i64) -> f64) -> Vec<f64> {
    let mut v = vec![0.0; 2 * n_modes + 1];
    v[0] = rate(0) * scale;
    for k in 1..=n_modes {
        let var = 0.5 * rate(k as i64) * scale;
        v[2 * k - 1] = var;
        v[2 * k] = var;
    }
    v
}

/// Noise covariance of the stacked `(w, w2)` increments over one step.
pub fn step_noise_covariance(config: &ModelConfig) -> DMatrix<f64> {
    let n = config.n_modes;
    let len = config.block_len();
    let mut diag = packed_variances(n, config.dt, |k| config.temperature_noise_rate(k));
    diag.extend(packed_variances(n, config.dt, |k| config.theta_noise_rate(k)));
    debug_assert_eq!(diag.len(), 2 * len);
    DMatrix::from_diagonal(&DVector::from_vec(diag))
}

/// Sensor evaluation rows on the temperature block and `R = diag(σ²)`.
pub fn build_measurement(config: &ModelConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = config.n_modes;
    let m = config.n_sensors();
    let mut h = DMatrix::zeros(m, config.state_dim());
    for (l, &x) in config.sensor_locations.iter().enumerate() {
        h[(l, 0)] = 1.0;
        for k in 1..=n {
            let kx = k as f64 * x;
            h[(l, 2 * k - 1)] = 2.0 * kx.cos();
            h[(l, 2 * k)] = -2.0 * kx.sin();
        }
    }
    let r = DMatrix::from_diagonal(&DVector::from_iterator(
        m,
        config.sensor_sigmas.iter().map(|s| s * s),
    ));
    (h, r)
}

/// Mode-space measurement matrices:
/// `H[k, k'] = Σ_ℓ exp(i(k - k')x_ℓ)` for `0 ≤ k ≤ m/2`, `|k'| ≤ N_T`, and
/// `R[k, k'] = Σ_ℓ σ_ℓ² exp(i(k' - k)x_ℓ)` for `0 ≤ k, k' ≤ m/2`.
pub fn mode_space_measurement(config: &ModelConfig) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = config.n_modes as i64;
    let rows = config.n_sensors() / 2 + 1;
    let sum = |j: i64, weights: &dyn Fn(usize) -> f64| -> Complex64 {
        config
            .sensor_locations
            .iter()
            .enumerate()
            .map(|(l, &x)| Complex64::from_polar(weights(l), j as f64 * x))
            .sum()
    };
    let h = DMatrix::from_fn(rows, (2 * n + 1) as usize, |k, col| {
        let kp = col as i64 - n;
        sum(k as i64 - kp, &|_| 1.0)
    });
    let r = DMatrix::from_fn(rows, rows, |k, kp| {
        sum(kp as i64 - k as i64, &|l| config.sensor_sigmas[l].powi(2))
    });
    (h, r)
}

/// Assembles `F`, `B`, `Q`, `H`, `R`, `s` for one step. `source_mid` is
/// the source at the step midpoint.
pub fn assemble_stage(
    ops: &TransitionOperators,
    config: &ModelConfig,
    source_mid: &SpectralField,
) -> Result<LinearStageModel> {
    let (h, r) = build_measurement(config);
    assemble_stage_with_measurement(ops, config, source_mid, h, r)
}

/// As [`assemble_stage`] with a precomputed sensor model.
pub fn assemble_stage_with_measurement(
    ops: &TransitionOperators,
    config: &ModelConfig,
    source_mid: &SpectralField,
    h: DMatrix<f64>,
    r: DMatrix<f64>,
) -> Result<LinearStageModel> {
    let n = ops.n_modes;
    let len = 2 * n + 1;
    if source_mid.n_modes() != n {
        return Err(Error::Dimension("source has the wrong number of modes".into()));
    }
    let mut tt = -ops.g.clone();
    for i in 0..len {
        tt[(i, i)] += Complex64::new(ops.f[i], 0.0);
    }
    let mut f = DMatrix::zeros(2 * len, 2 * len);
    f.view_mut((0, 0), (len, len)).copy_from(&realify(n, &tt));
    f.view_mut((0, len), (len, len)).copy_from(&realify(n, &ops.h));
    f.view_mut((len, len), (len, len))
        .copy_from(&realify_diagonal(n, &ops.theta_decay));

    let inv_d: Vec<f64> = ops.d.iter().map(|d| 1.0 / d).collect();
    let mut b = DMatrix::zeros(2 * len, 2 * len);
    b.view_mut((0, 0), (len, len))
        .copy_from(&realify_diagonal(n, &inv_d));
    b.view_mut((0, len), (len, len)).copy_from(&realify(n, &ops.c));
    let inv_den: Vec<f64> = ops.theta_denominator.iter().map(|d| 1.0 / d).collect();
    b.view_mut((len, len), (len, len))
        .copy_from(&realify_diagonal(n, &inv_den));

    let mut s = DVector::zeros(2 * len);
    source_mid
        .map_modes(|k, v| v * (config.dt / ops.d[(k + n as i64) as usize]))
        .pack_into(&mut s.as_mut_slice()[..len]);

    LinearStageModel::new(f, b, step_noise_covariance(config), h, r, s)
}

/// Continuous-time generator of the fluctuation dynamics restricted to the
/// k ≠ 0 components (row/column order: packed T block then packed θ block,
/// each without its k = 0 entry). Returns `(generator, noise_rate_covariance)`.
pub fn continuous_generator(
    config: &ModelConfig,
    mean_kappa: &SpectralField,
    mean_flux: &SpectralField,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = config.n_modes;
    let len = 2 * n + 1;
    if mean_kappa.n_modes() != n || mean_flux.n_modes() != n {
        return Err(Error::Dimension("mean fields have the wrong number of modes".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut tt = DMatrix::from_element(len, len, zero);
    let mut tth = DMatrix::from_element(len, len, zero);
    let mut thth = vec![0.0; len];
    for k in mode_range(n) {
        let i = (k + n as i64) as usize;
        let k2 = (k * k) as f64;
        thth[i] = -config.mu2 * k2;
        for kp in mode_range(n) {
            let j = (kp + n as i64) as usize;
            tt[(i, j)] = -mean_kappa.coeff(k - kp) * (k * kp) as f64;
            tth[(i, j)] = Complex64::new(0.0, k as f64) * mean_flux.coeff(k - kp);
        }
        tt[(i, i)] -= Complex64::new(config.mu1 * k2 * k2, 0.0);
    }
    let mut full = DMatrix::zeros(2 * len, 2 * len);
    full.view_mut((0, 0), (len, len)).copy_from(&realify(n, &tt));
    full.view_mut((0, len), (len, len)).copy_from(&realify(n, &tth));
    full.view_mut((len, len), (len, len))
        .copy_from(&realify_diagonal(n, &thth));

    let mut q = packed_variances(n, 1.0, |k| config.temperature_noise_rate(k));
    q.extend(packed_variances(n, 1.0, |k| config.theta_noise_rate(k)));

    let keep: Vec<usize> = (0..2 * len).filter(|&i| i != 0 && i != len).collect();
    let dim = keep.len();
    let gen = DMatrix::from_fn(dim, dim, |a, b| full[(keep[a], keep[b])]);
    let noise = DMatrix::from_diagonal(&DVector::from_iterator(dim, keep.iter().map(|&i| q[i])));
    Ok((gen, noise))
}

/// Index of the real (`imag = false`) or imaginary part of mode `k ≥ 1` of
/// the given block in the reduced (k ≠ 0) ordering of [`continuous_generator`].
pub fn reduced_index(n_modes: usize, theta_block: bool, k: usize, imag: bool) -> usize {
    assert!(k >= 1 && k <= n_modes);
    let base = if theta_block { 2 * n_modes } else { 0 };
    base + 2 * (k - 1) + usize::from(imag)
}
