//! Stationary covariance analysis and calibration of the noise model.
//!
//! Fluctuation sizes are specified as per-mode stationary variances
//! `C_k = E|u_k|²` of complex Fourier coefficients. For an isolated mode
//! driven at rate `Q_k` and damped at rate `λ_k`, `C_k = Q_k / (2λ_k)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kalman::{BeliefKind, GaussianBelief};
use crate::linalg::{symmetrize, symmetrize_in_place};
use crate::model::ModelConfig;
use crate::spectral::SpectralField;

/// Accepted Lyapunov residual relative to `‖Q‖`.
pub const LYAPUNOV_TOL: f64 = 1e-10;

/// Smallest diagonal entry of a default prior covariance.
pub const PRIOR_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct StationaryCovariance {
    /// Equal-time covariance `C̄(0)`.
    pub c0: DMatrix<f64>,
    /// Generator `F` whose transpose exponential propagates lags.
    pub generator: DMatrix<f64>,
    /// `‖F C + C Fᵀ + Q‖ / ‖Q‖` of the returned solution.
    pub residual: f64,
}

fn lyapunov_residual(f: &DMatrix<f64>, c: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    f * c + c * f.transpose() + q
}

/// Solves `F C + C Fᵀ + Q = 0` for Hurwitz `F`.
///
/// The continuous equation is mapped to a discrete one with a Cayley transform
/// and summed by Smith doubling, followed by residual refinement.
pub fn lyapunov_stationary(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<StationaryCovariance> {
    let n = f.nrows();
    if f.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "F is {:?} and Q is {:?}",
            f.shape(),
            q.shape()
        )));
    }
    if n == 0 {
        return Ok(StationaryCovariance {
            c0: DMatrix::zeros(0, 0),
            generator: f.clone(),
            residual: 0.0,
        });
    }
    let eig = f.complex_eigenvalues();
    let bad: Vec<(f64, f64)> = eig.iter().filter(|z| !(z.re < 0.0)).map(|z| (z.re, z.im)).collect();
    if !bad.is_empty() {
        return Err(Error::NotHurwitz(bad));
    }
    let mags: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    let h = 1.0 / (lo * hi).sqrt();

    let eye = DMatrix::<f64>::identity(n, n);
    let m = &eye - f * h;
    let lu = m.clone().lu();
    let a = lu
        .solve(&(&eye + f * h))
        .ok_or_else(|| Error::Numerical("Cayley transform is singular".into()))?;
    let m_inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Cayley transform is singular".into()))?;

    let q_norm = q.norm();
    let smith = |rhs: &DMatrix<f64>| -> DMatrix<f64> {
        let mut x = &m_inv * rhs * m_inv.transpose() * (2.0 * h);
        let mut ak = a.clone();
        for _ in 0..64 {
            let step = &ak * &x * ak.transpose();
            x += &step;
            ak = &ak * &ak;
            if step.norm() <= 1e-18 * x.norm() || ak.norm() < 1e-18 {
                break;
            }
        }
        symmetrize(&x)
    };

    let mut c = smith(q);
    let scale = q_norm.max(f64::MIN_POSITIVE);
    let mut residual = lyapunov_residual(f, &c, q).norm() / scale;
    for _ in 0..4 {
        if residual <= LYAPUNOV_TOL * 0.01 {
            break;
        }
        let r = lyapunov_residual(f, &c, q);
        let candidate = &c + smith(&r);
        let cand_res = lyapunov_residual(f, &candidate, q).norm() / scale;
        if cand_res >= residual {
            break;
        }
        c = candidate;
        residual = cand_res;
    }
    if q_norm > 0.0 && residual > LYAPUNOV_TOL {
        return Err(Error::Numerical(format!(
            "Lyapunov residual {residual:.3e} exceeds tolerance"
        )));
    }
    symmetrize_in_place(&mut c);
    Ok(StationaryCovariance {
        c0: c,
        generator: f.clone(),
        residual,
    })
}

/// `C̄(τ) = C̄(0) exp(τ Fᵀ)`.
pub fn lagged_covariance(stat: &StationaryCovariance, f: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::Config(format!("lag must be nonnegative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(stat.c0.clone());
    }
    Ok(&stat.c0 * (f.transpose() * tau).exp())
}

/// Power-law noise parameters `Q_k = α |k|^{-β}` for both blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseParameters {
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

fn fit_power_law(samples: &[(f64, f64)], what: &str) -> Result<(f64, f64)> {
    let mut ks: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if ks.len() < 2 {
        return Err(Error::Underdetermined(format!(
            "{what} targets need at least two distinct |k| ≥ 1"
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let alpha = (my - slope * mx).exp();
    Ok((alpha, -slope))
}

fn check_targets(targets: &[(u32, f64)], what: &str) -> Result<Vec<(f64, f64)>> {
    targets
        .iter()
        .filter(|(k, _)| *k >= 1)
        .map(|&(k, c)| {
            if c > 0.0 && c.is_finite() {
                Ok((k as f64, c))
            } else {
                Err(Error::Config(format!("{what} target at k = {k} must be positive, got {c}")))
            }
        })
        .collect()
}

/// Inverts the quasistationary relation `C_k = Q_k / (2λ_k)` and fits power laws.
///
/// Targets are `(|k|, C_k)` pairs; `k = 0` entries are ignored.
pub fn calibrate_noise(
    target_var_t: &[(u32, f64)],
    target_var_theta: &[(u32, f64)],
    config: &ModelConfig,
) -> Result<NoiseParameters> {
    let t = check_targets(target_var_t, "temperature")?;
    let th = check_targets(target_var_theta, "theta")?;
    let q_t: Vec<(f64, f64)> = t
        .iter()
        .map(|&(k, c)| (k, 2.0 * (config.kappa0 * k * k + config.mu1 * k.powi(4)) * c))
        .collect();
    let q_th: Vec<(f64, f64)> = th
        .iter()
        .map(|&(k, c)| (k, 2.0 * config.mu2 * k * k * c))
        .collect();
    let (alpha1, beta1) = fit_power_law(&q_t, "temperature")?;
    let (alpha2, beta2) = fit_power_law(&q_th, "theta")?;
    Ok(NoiseParameters {
        alpha1,
        beta1,
        alpha2,
        beta2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperdiffusionChoice {
    pub mu1_star: f64,
    /// `(μ₁, expected error)` for every candidate.
    pub curve: Vec<(f64, f64)>,
}

/// Expected error `Σ_{k≠0} (Q_T,k + |(μ₁/κ₀) k² S_k|²) / (κ₀k² + μ₁k⁴)²`.
pub fn hyperdiffusion_error(config: &ModelConfig, source: &SpectralField, mu1: f64) -> f64 {
    let n = config.n_modes as i64;
    let k0 = config.kappa0;
    (-n..=n)
        .filter(|&k| k != 0)
        .map(|k| {
            let k2 = (k * k) as f64;
            let bias = (mu1 / k0) * k2 * source.coeff(k).norm();
            let damp = k0 * k2 + mu1 * k2 * k2;
            (config.temperature_noise_rate(k) + bias * bias) / (damp * damp)
        })
        .sum()
}

/// Grid search of [`hyperdiffusion_error`] over `candidates`.
pub fn choose_hyperdiffusion(
    config: &ModelConfig,
    source: &SpectralField,
    candidates: &[f64],
) -> Result<HyperdiffusionChoice> {
    if candidates.is_empty() {
        return Err(Error::Config("no μ₁ candidates given".into()));
    }
    if let Some(bad) = candidates.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(Error::Config(format!("μ₁ candidate {bad} is not a nonnegative number")));
    }
    let curve: Vec<(f64, f64)> = candidates
        .iter()
        .map(|&mu| (mu, hyperdiffusion_error(config, source, mu)))
        .collect();
    let mut best = curve[0];
    for &point in &curve[1..] {
        if point.1 < best.1 {
            best = point;
        }
    }
    Ok(HyperdiffusionChoice {
        mu1_star: best.0,
        curve,
    })
}

/// Initial mean, prior covariance and mean diffusivity.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub prior: GaussianBelief,
    pub kappa: SpectralField,
}

/// Dimensional default prior: `T_k = S_k/(κ₀k²)`, `T₀ = S_rms/κ₀`,
/// `Var T_k = (S⁰_k/(κ₀k²))²` with `S⁰_k = max(|S_k|, S_rms)`, and `θ̃ ~ N(0, C_θ)`
/// with the stationary `C_θ,k = Q_θ,k/(2μ₂k²)`. The k = 0 entries use `k² → 1`.
pub fn default_initialization(config: &ModelConfig, source: &SpectralField) -> Result<InitialState> {
    if !(config.kappa0 > 0.0) {
        return Err(Error::Config(format!("κ₀ must be positive, got {}", config.kappa0)));
    }
    let n = config.n_modes;
    if source.n_modes() != n {
        return Err(Error::Dimension("source has the wrong number of modes".into()));
    }
    let len = config.block_len();
    let k0 = config.kappa0;
    let s_rms = source.rms();

    let mut temp = SpectralField::zeros(n);
    temp.set_mode(0, num_complex::Complex64::new(s_rms / k0, 0.0));
    for k in 1..=n as i64 {
        temp.set_mode(k, source.coeff(k) / (k0 * (k * k) as f64));
    }
    let mut mean = DVector::zeros(2 * len);
    temp.pack_into(&mut mean.as_mut_slice()[..len]);

    let mut var = vec![0.0; 2 * len];
    let t_var = |k: i64| {
        let k2 = (k * k).max(1) as f64;
        (source.coeff(k).norm().max(s_rms) / (k0 * k2)).powi(2)
    };
    let th_var = |k: i64| {
        let k2 = (k * k).max(1) as f64;
        config.theta_noise_rate(k) / (2.0 * config.mu2 * k2)
    };
    var[0] = t_var(0);
    var[len] = th_var(0);
    for k in 1..=n {
        let ki = k as i64;
        for off in [2 * k - 1, 2 * k] {
            var[off] = 0.5 * t_var(ki);
            var[len + off] = 0.5 * th_var(ki);
        }
    }
    let cov = DMatrix::from_diagonal(&DVector::from_iterator(
        2 * len,
        var.into_iter().map(|v| v.max(PRIOR_VARIANCE_FLOOR)),
    ));
    Ok(InitialState {
        prior: GaussianBelief::new(mean, cov, BeliefKind::Filtered, 0),
        kappa: SpectralField::constant(n, k0),
    })
}
