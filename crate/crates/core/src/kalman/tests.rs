use super::*;
use crate::linalg::{min_eigenvalue, rel_frobenius};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let g = randn(rng, n, n);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

struct Toy {
    stages: Vec<LinearStageModel>,
    ys: Vec<Option<DVector<f64>>>,
    prior: GaussianBelief,
}

fn toy(seed: u64, n: usize, m: usize, nf: usize, skip_every: usize) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = Vec::new();
    for _ in 0..nf {
        let a = randn(&mut rng, n, n);
        let f = &a * (0.9 * (n as f64).sqrt() / a.norm());
        let q = random_spd(&mut rng, n, 0.05);
        let h = randn(&mut rng, m, n);
        let r = random_spd(&mut rng, m, 0.1);
        let s = randn(&mut rng, n, 1).column(0) * 0.1;
        stages.push(
            LinearStageModel::new(f, DMatrix::identity(n, n), q, h, r, s.into_owned()).unwrap(),
        );
    }
    let ys = (0..nf)
        .map(|i| {
            if skip_every > 0 && (i + 1) % skip_every == 0 {
                None
            } else {
                Some(randn(&mut rng, m, 1).column(0).into_owned())
            }
        })
        .collect();
    let prior = GaussianBelief::new(
        randn(&mut rng, n, 1).column(0).into_owned(),
        random_spd(&mut rng, n, 0.5),
        BeliefKind::Filtered,
        0,
    );
    Toy { stages, ys, prior }
}

fn scalar_stage(f: f64, qb: f64, h: f64, r: f64, s: f64) -> LinearStageModel {
    LinearStageModel::new(
        DMatrix::from_element(1, 1, f),
        DMatrix::identity(1, 1),
        DMatrix::from_element(1, 1, qb),
        DMatrix::from_element(1, 1, h),
        DMatrix::from_element(1, 1, r),
        DVector::from_element(1, s),
    )
    .unwrap()
}

fn scalar_belief(mean: f64, var: f64, kind: BeliefKind) -> GaussianBelief {
    GaussianBelief::new(
        DVector::from_element(1, mean),
        DMatrix::from_element(1, 1, var),
        kind,
        0,
    )
}

// Straightforward textbook filter with explicit inverses and the Joseph form.
fn reference_filter(t: &Toy) -> Vec<(DVector<f64>, DMatrix<f64>)> {
    let mut x = t.prior.mean.clone();
    let mut p = t.prior.cov.clone();
    let mut out = vec![(x.clone(), p.clone())];
    for (st, y) in t.stages.iter().zip(&t.ys) {
        x = &st.f * x + &st.s;
        p = &st.f * p * st.f.transpose() + &st.b * &st.q * st.b.transpose();
        if let Some(y) = y {
            let s = &st.h * &p * st.h.transpose() + &st.r;
            let k = &p * st.h.transpose() * s.try_inverse().unwrap();
            x = &x + &k * (y - &st.h * &x);
            let i_kh = DMatrix::identity(x.len(), x.len()) - &k * &st.h;
            p = &i_kh * p * i_kh.transpose() + &k * &st.r * k.transpose();
        }
        out.push((x.clone(), p.clone()));
    }
    out
}

#[test]
fn predict_identity_dynamics_is_noop() {
    let st = LinearStageModel::new(
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 2),
        DMatrix::zeros(1, 2),
        DMatrix::identity(1, 1),
        DVector::zeros(2),
    )
    .unwrap();
    let b = GaussianBelief::new(
        DVector::from_vec(vec![1.0, -2.0]),
        DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        BeliefKind::Filtered,
        0,
    );
    let p = predict(&b, &st).unwrap();
    assert_eq!(p.mean, b.mean);
    assert_eq!(p.cov, b.cov);
    assert_eq!(p.kind, BeliefKind::Predicted);
    assert_eq!(p.time_index, 1);

    let mut shifted = st.clone();
    shifted.s = DVector::from_vec(vec![1.0, 0.0]);
    let p = predict(&b, &shifted).unwrap();
    assert_eq!(p.mean, DVector::from_vec(vec![2.0, -2.0]));
    assert_eq!(p.cov, b.cov);
}

#[test]
fn predict_scalar_covariance() {
    let st = scalar_stage(0.5, 0.1, 1.0, 1.0, 0.0);
    let p = predict(&scalar_belief(0.0, 1.0, BeliefKind::Filtered), &st).unwrap();
    assert!((p.cov[(0, 0)] - 0.35).abs() < 1e-15);
}

#[test]
fn predict_rejects_wrong_kind_and_dims() {
    let st = scalar_stage(0.5, 0.1, 1.0, 1.0, 0.0);
    assert!(matches!(
        predict(&scalar_belief(0.0, 1.0, BeliefKind::Predicted), &st),
        Err(Error::WrongKind { .. })
    ));
    let wide = GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2), BeliefKind::Filtered, 0);
    assert!(matches!(predict(&wide, &st), Err(Error::Dimension(_))));
}

#[test]
fn update_scalar_gain_half() {
    let st = scalar_stage(1.0, 0.0, 1.0, 1.0, 0.0);
    let prior = scalar_belief(0.7, 1.0, BeliefKind::Predicted);
    let post = update(&prior, &st, &DVector::from_element(1, 0.7)).unwrap();
    assert!((post.mean[0] - 0.7).abs() < 1e-15);
    assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);
    // K = 0.5: a unit innovation moves the mean by one half
    let post = update(&prior, &st, &DVector::from_element(1, 1.7)).unwrap();
    assert!((post.mean[0] - 1.2).abs() < 1e-15);
}

#[test]
fn update_uninformative_limits() {
    let st = scalar_stage(1.0, 0.0, 1.0, 1e12, 0.0);
    let prior = scalar_belief(0.3, 2.0, BeliefKind::Predicted);
    let post = update(&prior, &st, &DVector::from_element(1, 50.0)).unwrap();
    assert!(((post.mean[0] - 0.3) / 0.3).abs() < 1e-6);
    assert!(((post.cov[(0, 0)] - 2.0) / 2.0).abs() < 1e-6);

    let st0 = scalar_stage(1.0, 0.0, 0.0, 1.0, 0.0);
    let post = update(&prior, &st0, &DVector::from_element(1, 50.0)).unwrap();
    assert_eq!(post.mean, prior.mean);
    assert_eq!(post.cov, prior.cov);
}

#[test]
fn update_errors() {
    let st = scalar_stage(1.0, 0.0, 1.0, 1.0, 0.0);
    let bad = scalar_belief(0.0, -1.0, BeliefKind::Predicted);
    assert!(matches!(
        update(&bad, &st, &DVector::from_element(1, 0.0)),
        Err(Error::NotPositiveDefinite(_))
    ));
    let r_singular = LinearStageModel::new(
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        DMatrix::zeros(1, 1),
        DMatrix::identity(1, 1),
        DMatrix::zeros(1, 1),
        DVector::zeros(1),
    );
    assert!(matches!(r_singular, Err(Error::NotPositiveDefinite(_))));
}

#[test]
fn information_and_innovation_forms_agree() {
    for seed in 0..10 {
        let t = toy(seed, 6, 3, 1, 0);
        let pred = predict(&t.prior, &t.stages[0]).unwrap();
        let y = t.ys[0].as_ref().unwrap();
        let a = update(&pred, &t.stages[0], y).unwrap();
        let b = update_information_form(&pred, &t.stages[0], y).unwrap();
        assert!((&a.mean - &b.mean).amax() < 1e-10);
        assert!((&a.cov - &b.cov).amax() < 1e-10);
    }
}

#[test]
fn filter_with_no_stages_returns_prior() {
    let t = toy(1, 4, 2, 0, 0);
    let out = filter_pass(&[], &[], &t.prior).unwrap();
    assert!(out.predicted.is_empty());
    assert_eq!(out.filtered.len(), 1);
    assert_eq!(out.filtered[0].mean, t.prior.mean);
}

#[test]
fn filter_skipping_all_measurements() {
    let mut t = toy(2, 4, 2, 6, 0);
    t.ys.iter_mut().for_each(|y| *y = None);
    let out = filter_pass(&t.stages, &t.ys, &t.prior).unwrap();
    for i in 0..6 {
        assert_eq!(out.predicted[i].mean, out.filtered[i + 1].mean);
        assert_eq!(out.predicted[i].cov, out.filtered[i + 1].cov);
    }
    // nothing to correct: the smoother reproduces the deterministic forward run
    let sm = rts_smooth(&t.stages, &out).unwrap();
    let mut x = t.prior.mean.clone();
    for (i, st) in t.stages.iter().enumerate() {
        x = &st.f * x + &st.s;
        assert!((&sm[i + 1].mean - &x).amax() < 1e-10);
    }
}

#[test]
fn filter_matches_reference_implementation() {
    let t = toy(3, 10, 4, 25, 4);
    let out = filter_pass(&t.stages, &t.ys, &t.prior).unwrap();
    let reference = reference_filter(&t);
    for (b, (x, p)) in out.filtered.iter().zip(&reference) {
        assert!((&b.mean - x).amax() < 1e-10);
        assert!((&b.cov - p).amax() < 1e-10);
    }
}

#[test]
fn single_stage_smoother_final_equals_filtered() {
    let t = toy(4, 5, 2, 1, 0);
    let out = filter_pass(&t.stages, &t.ys, &t.prior).unwrap();
    let sm = rts_smooth(&t.stages, &out).unwrap();
    assert_eq!(sm[1].mean, out.filtered[1].mean);
    assert_eq!(sm[1].cov, out.filtered[1].cov);
    assert_eq!(sm[0].kind, BeliefKind::Smoothed);
}

#[test]
fn smoother_matches_block_tridiagonal_solve() {
    let t = toy(5, 6, 3, 30, 5);
    let res = smooth(&t.stages, &t.ys, &t.prior).unwrap();
    let block = solve_block_tridiagonal(&t.stages, &t.ys, &t.prior).unwrap();
    for (b, (m, c)) in res.beliefs.iter().zip(block.means.iter().zip(&block.covs)) {
        assert!((&b.mean - m).norm() <= 1e-8 * m.norm().max(1.0));
        assert!(rel_frobenius(&b.cov, c) < 1e-8);
    }
}

#[test]
fn block_solve_single_step_matches_update() {
    // No dynamics coupling: prior on u0 only, measurement at time 1 with F = 0.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 4;
    let q = random_spd(&mut rng, n, 0.2);
    let h = randn(&mut rng, 2, n);
    let r = random_spd(&mut rng, 2, 0.1);
    let s = randn(&mut rng, n, 1).column(0).into_owned();
    let st = LinearStageModel::new(DMatrix::zeros(n, n), DMatrix::identity(n, n), q.clone(), h, r, s.clone()).unwrap();
    let y = randn(&mut rng, 2, 1).column(0).into_owned();
    let prior = GaussianBelief::new(DVector::zeros(n), DMatrix::identity(n, n), BeliefKind::Filtered, 0);
    let block = solve_block_tridiagonal(std::slice::from_ref(&st), &[Some(y.clone())], &prior).unwrap();
    let pred = GaussianBelief::new(s, q, BeliefKind::Predicted, 1);
    let post = update(&pred, &st, &y).unwrap();
    assert!((&block.means[1] - &post.mean).amax() < 1e-9);
    assert!((&block.covs[1] - &post.cov).amax() < 1e-9);
}

#[test]
fn contraction_properties() {
    for seed in 10..20 {
        let t = toy(seed, 5, 2, 12, 3);
        let out = filter_pass(&t.stages, &t.ys, &t.prior).unwrap();
        let sm = rts_smooth(&t.stages, &out).unwrap();
        for i in 0..t.stages.len() {
            let diff = &out.predicted[i].cov - &out.filtered[i + 1].cov;
            assert!(min_eigenvalue(&diff) >= -1e-10);
        }
        for (s, f) in sm.iter().zip(&out.filtered) {
            assert!(s.cov.trace() <= f.cov.trace() + 1e-10);
            let sym = (&s.cov - s.cov.transpose()).amax();
            assert!(sym <= 1e-12 * s.cov.amax());
        }
    }
}

#[test]
fn objective_minimized_at_smoothed_means() {
    let t = toy(7, 4, 2, 10, 0);
    let res = smooth(&t.stages, &t.ys, &t.prior).unwrap();
    let best = res.objective.total;
    let means = res.means();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    for _ in 0..100 {
        let perturbed: Vec<_> = means
            .iter()
            .map(|m| m + randn(&mut rng, m.len(), 1).column(0) * 1e-3)
            .collect();
        let val = least_squares_objective(&t.stages, &t.ys, &t.prior, &perturbed).unwrap();
        assert!(val.total >= best);
    }
}

#[test]
fn objective_reduces_to_prior_term() {
    let t = toy(8, 3, 2, 4, 0);
    // Build a trajectory with zero innovations, and measurements that match it.
    let mut traj = vec![t.prior.mean.clone() + DVector::from_element(3, 0.5)];
    let mut ys = Vec::new();
    for st in &t.stages {
        let next = &st.f * traj.last().unwrap() + &st.s;
        ys.push(Some(&st.h * &next));
        traj.push(next);
    }
    let obj = least_squares_objective(&t.stages, &ys, &t.prior, &traj).unwrap();
    let d = DVector::from_element(3, 0.5);
    let expected = d.dot(&(t.prior.cov.clone().try_inverse().unwrap() * &d));
    assert!(obj.measurement.abs() < 1e-20);
    assert!(obj.dynamics.abs() < 1e-20);
    assert!((obj.total - expected).abs() < 1e-12 * expected);
}

#[test]
fn measurement_offset_shifts_smoothed_means_linearly() {
    // The smoothed mean is affine in the data: shifting one sensor by c moves
    // the estimate by c times the response to a unit shift.
    let t = toy(9, 5, 3, 15, 0);
    let base = smooth(&t.stages, &t.ys, &t.prior).unwrap().means();
    let shift = |c: f64| {
        let ys: Vec<_> = t
            .ys
            .iter()
            .map(|y| y.as_ref().map(|y| {
                let mut y = y.clone();
                y[1] += c;
                y
            }))
            .collect();
        smooth(&t.stages, &ys, &t.prior).unwrap().means()
    };
    let one = shift(1.0);
    let three = shift(3.0);
    let block_ys: Vec<_> = t
        .ys
        .iter()
        .map(|y| y.as_ref().map(|y| {
            let mut y = y.clone();
            y[1] += 3.0;
            y
        }))
        .collect();
    let oracle = solve_block_tridiagonal(&t.stages, &block_ys, &t.prior).unwrap();
    for i in 0..base.len() {
        let lin = &base[i] + (&one[i] - &base[i]) * 3.0;
        assert!((&three[i] - lin).amax() < 1e-9);
        assert!((&three[i] - &oracle.means[i]).amax() < 1e-8 * three[i].amax().max(1.0));
    }
}
