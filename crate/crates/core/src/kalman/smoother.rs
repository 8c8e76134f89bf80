use nalgebra::DVector;

use super::{
    least_squares_objective, predict, update, BeliefKind, GaussianBelief, LinearStageModel,
    ObjectiveBreakdown,
};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetrize_in_place};

/// Forward-pass output. `filtered[0]` is the prior; `predicted[i]` and
/// `filtered[i + 1]` both refer to time `i + 1`.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub predicted: Vec<GaussianBelief>,
    pub filtered: Vec<GaussianBelief>,
}

#[derive(Debug, Clone)]
pub struct SmootherResult {
    /// Smoothed beliefs for times `0..=N_f`.
    pub beliefs: Vec<GaussianBelief>,
    /// Filtered beliefs for times `0..=N_f` (index 0 is the prior).
    pub filtered: Vec<GaussianBelief>,
    /// Least-squares functional evaluated at the smoothed means.
    pub objective: ObjectiveBreakdown,
}

impl SmootherResult {
    pub fn means(&self) -> Vec<DVector<f64>> {
        self.beliefs.iter().map(|b| b.mean.clone()).collect()
    }
}

/// Sequential predict/update. `measurements[i]` is the observation at time
/// `i + 1`; `None` skips the update for that step.
pub fn filter_pass(
    stages: &[LinearStageModel],
    measurements: &[Option<DVector<f64>>],
    prior: &GaussianBelief,
) -> Result<FilterOutput> {
    if stages.len() != measurements.len() {
        return Err(Error::Dimension(format!(
            "{} stages but {} measurement slots",
            stages.len(),
            measurements.len()
        )));
    }
    let mut start = prior.clone();
    start.kind = BeliefKind::Filtered;
    let mut predicted = Vec::with_capacity(stages.len());
    let mut filtered = Vec::with_capacity(stages.len() + 1);
    filtered.push(start);
    for (stage, y) in stages.iter().zip(measurements) {
        let pred = predict(filtered.last().expect("prior is present"), stage)?;
        let filt = match y {
            Some(y) => update(&pred, stage, y)?,
            None => {
                let mut f = pred.clone();
                f.kind = BeliefKind::Filtered;
                f
            }
        };
        predicted.push(pred);
        filtered.push(filt);
    }
    Ok(FilterOutput {
        predicted,
        filtered,
    })
}

/// Rauch-Tung-Striebel backward pass with gain `P(i|i) Fᵀ P(i+1|i)⁻¹`.
pub fn rts_smooth(stages: &[LinearStageModel], filter: &FilterOutput) -> Result<Vec<GaussianBelief>> {
    let nf = stages.len();
    if filter.predicted.len() != nf || filter.filtered.len() != nf + 1 {
        return Err(Error::Dimension("filter output does not match stage count".into()));
    }
    let mut out = Vec::with_capacity(nf + 1);
    let last = &filter.filtered[nf];
    out.push(GaussianBelief::new(
        last.mean.clone(),
        last.cov.clone(),
        BeliefKind::Smoothed,
        nf,
    ));
    for i in (0..nf).rev() {
        let filt = &filter.filtered[i];
        let pred = &filter.predicted[i];
        let next = out.last().expect("pushed above");
        let chol = cholesky(&pred.cov, &format!("predicted covariance at step {}", i + 1))?;
        // J = P(i|i) Fᵀ P(i+1|i)⁻¹  <=>  Jᵀ = P(i+1|i)⁻¹ F P(i|i)
        let f_p = &stages[i].f * &filt.cov;
        let gain = chol.solve(&f_p).transpose();
        let mean = &filt.mean + &gain * (&next.mean - &pred.mean);
        let mut cov = &filt.cov + &gain * (&next.cov - &pred.cov) * gain.transpose();
        symmetrize_in_place(&mut cov);
        out.push(GaussianBelief::new(mean, cov, BeliefKind::Smoothed, i));
    }
    out.reverse();
    Ok(out)
}

/// Filter, smooth, and evaluate the least-squares functional at the result.
pub fn smooth(
    stages: &[LinearStageModel],
    measurements: &[Option<DVector<f64>>],
    prior: &GaussianBelief,
) -> Result<SmootherResult> {
    let filter = filter_pass(stages, measurements, prior)?;
    let beliefs = rts_smooth(stages, &filter)?;
    let means: Vec<DVector<f64>> = beliefs.iter().map(|b| b.mean.clone()).collect();
    let objective = least_squares_objective(stages, measurements, prior, &means)?;
    Ok(SmootherResult {
        beliefs,
        filtered: filter.filtered,
        objective,
    })
}
