use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use super::{GaussianBelief, LinearStageModel};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, symmetrize_in_place};

/// Relative ridge added to `B Q Bᵀ` before inversion on the least-squares path.
pub const Q_B_RIDGE: f64 = 1e-12;

/// Terms of the generalized least-squares functional.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ObjectiveBreakdown {
    pub prior: f64,
    pub measurement: f64,
    pub dynamics: f64,
    pub total: f64,
    /// `(measurement, dynamics)` contribution of each stage.
    pub per_step: Vec<(f64, f64)>,
}

/// Marginal smoothed means and covariances from the block-tridiagonal solve.
#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

fn regularized_q_b_inverse(stage: &LinearStageModel, index: usize) -> Result<DMatrix<f64>> {
    let q_b = stage.q_b();
    let n = q_b.nrows();
    let eps = Q_B_RIDGE * q_b.trace() / n as f64;
    let reg = q_b + DMatrix::identity(n, n) * eps.max(f64::MIN_POSITIVE);
    spd_inverse(&reg, &format!("B Q Bᵀ at stage {index}"))
}

fn check_lengths(
    stages: &[LinearStageModel],
    measurements: &[Option<DVector<f64>>],
    prior: &GaussianBelief,
) -> Result<()> {
    if stages.len() != measurements.len() {
        return Err(Error::Dimension(format!(
            "{} stages but {} measurement slots",
            stages.len(),
            measurements.len()
        )));
    }
    let n = prior.mean.len();
    if let Some(bad) = stages.iter().position(|s| s.state_dim() != n) {
        return Err(Error::Dimension(format!("stage {bad} has wrong state dimension")));
    }
    Ok(())
}

/// Generalized least-squares functional
///
/// `(u₀-û₀)ᵀP₀⁻¹(u₀-û₀) + Σ (y-Hu)ᵀR⁻¹(y-Hu) + Σ (u_{i+1}-F u_i-s)ᵀ Q_B⁻¹ (u_{i+1}-F u_i-s)`.
pub fn least_squares_objective(
    stages: &[LinearStageModel],
    measurements: &[Option<DVector<f64>>],
    prior: &GaussianBelief,
    trajectory: &[DVector<f64>],
) -> Result<ObjectiveBreakdown> {
    check_lengths(stages, measurements, prior)?;
    if trajectory.len() != stages.len() + 1 {
        return Err(Error::Dimension(format!(
            "trajectory has {} states, expected {}",
            trajectory.len(),
            stages.len() + 1
        )));
    }
    let p0_chol = cholesky(&prior.cov, "prior covariance")?;
    let d0 = &trajectory[0] - &prior.mean;
    let prior_term = d0.dot(&p0_chol.solve(&d0));

    let mut out = ObjectiveBreakdown {
        prior: prior_term,
        per_step: Vec::with_capacity(stages.len()),
        ..Default::default()
    };
    for (i, (stage, y)) in stages.iter().zip(measurements).enumerate() {
        let w = regularized_q_b_inverse(stage, i)?;
        let innov = &trajectory[i + 1] - &stage.f * &trajectory[i] - &stage.s;
        let dyn_term = innov.dot(&(&w * &innov));
        let meas_term = match y {
            Some(y) => {
                let resid = y - &stage.h * &trajectory[i + 1];
                let r = cholesky(&stage.r, "R")?;
                resid.dot(&r.solve(&resid))
            }
            None => 0.0,
        };
        out.dynamics += dyn_term;
        out.measurement += meas_term;
        out.per_step.push((meas_term, dyn_term));
    }
    out.total = out.prior + out.measurement + out.dynamics;
    Ok(out)
}

/// Solves the normal equations of [`least_squares_objective`] directly.
///
/// The Hessian is symmetric block tridiagonal with diagonal blocks
/// `[P₀⁻¹]ᵢ₌₀ + Q_{B,i-1}⁻¹ + F_iᵀ Q_{B,i}⁻¹ F_i + Hᵀ R⁻¹ H` and off-diagonal
/// blocks `-Q_{B,i}⁻¹ F_i`. A forward block-Cholesky (Schur complement) sweep
/// followed by back substitution gives the means; the diagonal blocks of the
/// inverse give the marginal covariances.
pub fn solve_block_tridiagonal(
    stages: &[LinearStageModel],
    measurements: &[Option<DVector<f64>>],
    prior: &GaussianBelief,
) -> Result<BlockSolution> {
    check_lengths(stages, measurements, prior)?;
    let nf = stages.len();
    let n = prior.mean.len();

    let p0_inv = spd_inverse(&prior.cov, "prior covariance")?;
    let mut diag: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); nf + 1];
    let mut rhs: Vec<DVector<f64>> = vec![DVector::zeros(n); nf + 1];
    // lower[i] = block (i+1, i)
    let mut lower: Vec<DMatrix<f64>> = Vec::with_capacity(nf);

    diag[0] += &p0_inv;
    rhs[0] += &p0_inv * &prior.mean;
    for (i, (stage, y)) in stages.iter().zip(measurements).enumerate() {
        let w = regularized_q_b_inverse(stage, i)?;
        let ft_w = stage.f.transpose() * &w;
        diag[i] += &ft_w * &stage.f;
        rhs[i] -= &ft_w * &stage.s;
        diag[i + 1] += &w;
        rhs[i + 1] += &w * &stage.s;
        lower.push(-(&w * &stage.f));
        if let Some(y) = y {
            let r_inv = spd_inverse(&stage.r, "R")?;
            let ht_rinv = stage.h.transpose() * r_inv;
            diag[i + 1] += &ht_rinv * &stage.h;
            rhs[i + 1] += ht_rinv * y;
        }
    }

    // Forward sweep: Schur complements D_i and reduced right-hand sides z_i.
    let mut factors: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(nf + 1);
    let mut z: Vec<DVector<f64>> = Vec::with_capacity(nf + 1);
    for i in 0..=nf {
        let mut d = diag[i].clone();
        let mut zi = rhs[i].clone();
        if i > 0 {
            let prev = &factors[i - 1];
            let a_lo = &lower[i - 1];
            // A_{i,i-1} D_{i-1}⁻¹ A_{i-1,i}
            let x = prev.solve(&a_lo.transpose());
            d -= a_lo * x;
            zi -= a_lo * prev.solve(&z[i - 1]);
        }
        symmetrize_in_place(&mut d);
        let chol = Cholesky::new(d).ok_or_else(|| {
            Error::NotPositiveDefinite(format!("assembled normal equations at block {i}"))
        })?;
        factors.push(chol);
        z.push(zi);
    }

    // Back substitution.
    let mut means = vec![DVector::zeros(n); nf + 1];
    means[nf] = factors[nf].solve(&z[nf]);
    for i in (0..nf).rev() {
        let upper = lower[i].transpose();
        means[i] = factors[i].solve(&(&z[i] - upper * &means[i + 1]));
    }

    // Diagonal blocks of the inverse.
    let mut covs = vec![DMatrix::zeros(n, n); nf + 1];
    covs[nf] = factors[nf].inverse();
    symmetrize_in_place(&mut covs[nf]);
    for i in (0..nf).rev() {
        let d_inv = factors[i].inverse();
        let g = factors[i].solve(&lower[i].transpose());
        let mut c = d_inv + &g * &covs[i + 1] * g.transpose();
        symmetrize_in_place(&mut c);
        covs[i] = c;
    }
    Ok(BlockSolution { means, covs })
}
