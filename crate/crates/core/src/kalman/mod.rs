//! Discrete linear-Gaussian filtering and fixed-interval smoothing.
//!
//! Model for stage `i` (mapping time `i` to time `i + 1`):
//!
//! `u_{i+1} = F_i u_i + B_i w_i + s_i`,  `w_i ~ N(0, Q_i)`
//!
//! `y_{i+1} = H_i u_{i+1} + e_{i+1}`,      `e ~ N(0, R_i)`
//!
//! The forward pass ([`filter_pass`]) is followed by a Rauch-Tung-Striebel
//! backward correction ([`rts_smooth`]). [`solve_block_tridiagonal`] solves the
//! same problem as a sparse generalized least-squares system and is used as an
//! independent check of the recursions.

mod least_squares;
mod smoother;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_psd, cholesky, spd_inverse, symmetrize_in_place};

pub use least_squares::{
    least_squares_objective, solve_block_tridiagonal, BlockSolution, ObjectiveBreakdown,
};
pub use smoother::{filter_pass, rts_smooth, smooth, FilterOutput, SmootherResult};

/// Relative eigenvalue tolerance for covariance positivity checks.
pub const COV_PSD_TOL: f64 = 1e-10;

/// One time step of a linear-Gaussian state-space model.
#[derive(Debug, Clone)]
pub struct LinearStageModel {
    pub f: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DVector<f64>,
    q_b: DMatrix<f64>,
}

impl LinearStageModel {
    /// Validates dimensions, requires `R` to be SPD and `Q` to be symmetric
    /// positive semidefinite, and caches `B Q Bᵀ`.
    pub fn new(
        f: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        h: DMatrix<f64>,
        r: DMatrix<f64>,
        s: DVector<f64>,
    ) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n {
            return Err(Error::Dimension(format!("F must be square, got {}x{}", n, f.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B must have {n} rows, got {}", b.nrows())));
        }
        let nr = b.ncols();
        if q.nrows() != nr || q.ncols() != nr {
            return Err(Error::Dimension(format!("Q must be {nr}x{nr}")));
        }
        if h.ncols() != n {
            return Err(Error::Dimension(format!("H must have {n} columns, got {}", h.ncols())));
        }
        let m = h.nrows();
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::Dimension(format!("R must be {m}x{m}")));
        }
        if s.len() != n {
            return Err(Error::Dimension(format!("s must have length {n}, got {}", s.len())));
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite("Q is not symmetric".into()));
        }
        check_psd(&q, COV_PSD_TOL, "Q")?;
        if m > 0 {
            cholesky(&r, "R")?;
        }
        let mut q_b = &b * &q * b.transpose();
        symmetrize_in_place(&mut q_b);
        Ok(Self { f, b, q, h, r, s, q_b })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.h.nrows()
    }

    /// Effective process-noise covariance `B Q Bᵀ`.
    pub fn q_b(&self) -> &DMatrix<f64> {
        &self.q_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeliefKind {
    Predicted,
    Filtered,
    Smoothed,
}

/// Gaussian estimate of the state at a time index.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub kind: BeliefKind,
    pub time_index: usize,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, kind: BeliefKind, time_index: usize) -> Self {
        Self {
            mean,
            cov,
            kind,
            time_index,
        }
    }

    fn expect_kind(&self, expected: BeliefKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::WrongKind {
                expected,
                found: self.kind,
            });
        }
        Ok(())
    }

    pub fn std_devs(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

fn check_state_dims(belief: &GaussianBelief, stage: &LinearStageModel) -> Result<()> {
    let n = stage.state_dim();
    if belief.mean.len() != n || belief.cov.nrows() != n || belief.cov.ncols() != n {
        return Err(Error::Dimension(format!(
            "belief has dimension {}, stage expects {n}",
            belief.mean.len()
        )));
    }
    Ok(())
}

/// Time update: `mean' = F mean + s`, `cov' = F cov Fᵀ + B Q Bᵀ`.
pub fn predict(belief: &GaussianBelief, stage: &LinearStageModel) -> Result<GaussianBelief> {
    belief.expect_kind(BeliefKind::Filtered)?;
    check_state_dims(belief, stage)?;
    let mean = &stage.f * &belief.mean + &stage.s;
    let mut cov = &stage.f * &belief.cov * stage.f.transpose() + stage.q_b();
    symmetrize_in_place(&mut cov);
    Ok(GaussianBelief::new(
        mean,
        cov,
        BeliefKind::Predicted,
        belief.time_index + 1,
    ))
}

fn check_update_inputs(belief: &GaussianBelief, stage: &LinearStageModel, y: &DVector<f64>) -> Result<()> {
    belief.expect_kind(BeliefKind::Predicted)?;
    check_state_dims(belief, stage)?;
    if y.len() != stage.obs_dim() {
        return Err(Error::Dimension(format!(
            "measurement has length {}, H has {} rows",
            y.len(),
            stage.obs_dim()
        )));
    }
    check_psd(&belief.cov, COV_PSD_TOL, "predicted covariance")
}

/// Measurement update in innovation form, `K = P Hᵀ (H P Hᵀ + R)⁻¹`.
pub fn update(belief: &GaussianBelief, stage: &LinearStageModel, y: &DVector<f64>) -> Result<GaussianBelief> {
    check_update_inputs(belief, stage, y)?;
    let h = &stage.h;
    let ph_t = &belief.cov * h.transpose();
    let mut s = h * &ph_t + &stage.r;
    symmetrize_in_place(&mut s);
    let chol = cholesky(&s, "innovation covariance")?;
    // K = P Hᵀ S⁻¹  <=>  Kᵀ = S⁻¹ H P
    let gain = chol.solve(&ph_t.transpose()).transpose();
    let innovation = y - h * &belief.mean;
    let mean = &belief.mean + &gain * innovation;
    let mut cov = &belief.cov - &gain * ph_t.transpose();
    symmetrize_in_place(&mut cov);
    Ok(GaussianBelief::new(mean, cov, BeliefKind::Filtered, belief.time_index))
}

/// Measurement update in information form:
/// `P⁺⁻¹ = P⁻¹ + Hᵀ R⁻¹ H`, `K = P⁺ Hᵀ R⁻¹`. Requires an SPD prior.
pub fn update_information_form(
    belief: &GaussianBelief,
    stage: &LinearStageModel,
    y: &DVector<f64>,
) -> Result<GaussianBelief> {
    check_update_inputs(belief, stage, y)?;
    let p_inv = spd_inverse(&belief.cov, "predicted covariance")?;
    let r_inv = spd_inverse(&stage.r, "R")?;
    let h = &stage.h;
    let info = p_inv + h.transpose() * &r_inv * h;
    let cov = spd_inverse(&info, "posterior information")?;
    let gain = &cov * h.transpose() * r_inv;
    let mean = &belief.mean + &gain * (y - h * &belief.mean);
    Ok(GaussianBelief::new(mean, cov, BeliefKind::Filtered, belief.time_index))
}

#[cfg(test)]
mod tests;
