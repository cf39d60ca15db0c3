//! Embedded oracle suite: the cross-checks that hold the crate together
//! (finite differences vs analytic gradients, the two posterior-mean code
//! paths, covariance invariants), runnable from the CLI as a smoke test.

use crate::analytic::{correct, filter_steps, map_solve, BeliefState};
use crate::error::Result;
use crate::gradient::{compute_errors, grad_a, grad_b, grad_c, grad_mu, infer, loss,
    GradientFilterState, InferenceConfig};
use crate::linalg::{finite_diff_grad, is_psd, spd_inverse, Mat, Vector};
use crate::model::{control_schedule, kinematic_model, seeded_stream, standard_normal_mat,
    CMode, LinearGaussianModel};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Knobs for fault injection; used to prove the checks can actually fail.
#[derive(Clone, Copy, Debug, Default)]
pub struct SelftestOptions {
    /// Flip the sign of the state-gradient before comparing it against
    /// finite differences.
    pub corrupt_grad_mu: bool,
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let g = standard_normal_mat(rng, n, n);
    g.transpose()
        .matmul(&g)
        .unwrap()
        .scale(1.0 / n as f64)
        .add(&Mat::identity(n))
        .unwrap()
        .symmetrize()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    standard_normal_mat(rng, n, 1).column(0)
}

fn random_state(rng: &mut ChaCha8Rng) -> GradientFilterState {
    GradientFilterState::new(
        standard_normal_mat(rng, 3, 3),
        standard_normal_mat(rng, 3, 1),
        standard_normal_mat(rng, 3, 3),
        random_spd(rng, 3),
        random_spd(rng, 3),
        Vector::zeros(3),
    )
    .unwrap()
}

fn check_gradients(opts: &SelftestOptions) -> Result<CheckResult> {
    let mut rng = seeded_stream(1001, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let state = random_state(&mut rng);
        let mu_prev = random_vec(&mut rng, 3);
        let u = random_vec(&mut rng, 1);
        let y = random_vec(&mut rng, 3);
        let mu_next = random_vec(&mut rng, 3);
        let errors = compute_errors(&state, &mu_next, &mu_prev, &u, &y)?;

        // the loss is the full quadratic, the update directions are half its
        // gradient, hence the factor two on every comparison below
        let fd = finite_diff_grad(
            |v| loss(&state, &Vector::new(v.to_vec()).unwrap(), &mu_prev, &u, &y).unwrap(),
            mu_next.as_slice(),
            1e-5,
        )?;
        let mut g = grad_mu(&state, &errors)?;
        if opts.corrupt_grad_mu {
            g = g.scale(-1.0);
        }
        for i in 0..3 {
            let want = 2.0 * g.get(i);
            worst = worst.max((fd[i] - want).abs() / want.abs().max(1.0));
        }

        let fd_a = finite_diff_grad(
            |v| {
                let mut s = state.clone();
                s.a_hat = Mat::new(3, 3, v.to_vec()).unwrap();
                loss(&s, &mu_next, &mu_prev, &u, &y).unwrap()
            },
            state.a_hat.data(),
            1e-5,
        )?;
        let ga = grad_a(&state, &errors, &mu_prev)?;
        let fd_b = finite_diff_grad(
            |v| {
                let mut s = state.clone();
                s.b_hat = Mat::new(3, 1, v.to_vec()).unwrap();
                loss(&s, &mu_next, &mu_prev, &u, &y).unwrap()
            },
            state.b_hat.data(),
            1e-5,
        )?;
        let gb = grad_b(&state, &errors, &u)?;
        let fd_c = finite_diff_grad(
            |v| {
                let mut s = state.clone();
                s.c_hat = Mat::new(3, 3, v.to_vec()).unwrap();
                loss(&s, &mu_next, &mu_prev, &u, &y).unwrap()
            },
            state.c_hat.data(),
            1e-5,
        )?;
        let gc = grad_c(&state, &errors, &mu_next)?;
        for (fd, g) in [(&fd_a, &ga), (&fd_b, &gb), (&fd_c, &gc)] {
            for (i, fd_i) in fd.iter().enumerate() {
                let want = 2.0 * g.data()[i];
                worst = worst.max((fd_i - want).abs() / want.abs().max(1.0));
            }
        }
    }
    Ok(CheckResult {
        name: "gradients_match_finite_differences",
        passed: worst <= 1e-5,
        detail: format!("worst relative error {worst:e}"),
    })
}

fn check_map_equivalence() -> Result<CheckResult> {
    let mut rng = seeded_stream(1002, 0);
    let mut worst_map: f64 = 0.0;
    let mut worst_gd: f64 = 0.0;
    let mut drawn = 0;
    while drawn < 50 {
        let model = kinematic_model(0.01, 1.0, 1.0, CMode::Random(rng.random()))?;
        let prior_cov = random_spd(&mut rng, 3);
        let prior_precision = spd_inverse(&prior_cov)?.symmetrize();
        let obs_precision = spd_inverse(&model.sigma_z)?.symmetrize();
        // plain gradient descent needs a well-conditioned objective to hit
        // 1e-6 in 500 steps; reject badly conditioned draws
        let h = model
            .c
            .transpose()
            .matmul(&obs_precision)?
            .matmul(&model.c)?
            .add(&prior_precision)?
            .symmetrize();
        if crate::linalg::spd_condition(&h)? > 25.0 {
            continue;
        }
        drawn += 1;
        let mu_t = random_vec(&mut rng, 3);
        let u = random_vec(&mut rng, 1);
        let y = random_vec(&mut rng, 3);

        let via_map = map_solve(&model, &mu_t, &u, &prior_precision, &obs_precision, &y)?;
        let predicted = BeliefState::new(
            model.a.mul_vec(&mu_t)?.add(&model.b.mul_vec(&u)?)?,
            prior_cov,
        )?;
        let via_gain = correct(&model, &predicted, &y)?.mean;
        worst_map = worst_map.max(
            via_map.sub(&via_gain)?.inf_norm() / via_gain.inf_norm().max(1.0),
        );

        let state = GradientFilterState::new(
            model.a.clone(),
            model.b.clone(),
            model.c.clone(),
            prior_precision,
            obs_precision,
            Vector::zeros(3),
        )?;
        let cfg = InferenceConfig {
            n_steps: 500,
            ..Default::default()
        };
        let via_gd = infer(&state, &mu_t, &u, &y, &cfg)?;
        worst_gd = worst_gd.max(
            via_gd.sub(&via_map)?.inf_norm() / via_map.inf_norm().max(1.0),
        );
    }
    Ok(CheckResult {
        name: "posterior_mean_paths_agree",
        passed: worst_map <= 1e-8 && worst_gd <= 1e-6,
        detail: format!("normal-equations vs gain {worst_map:e}, descent vs normal-equations {worst_gd:e}"),
    })
}

fn check_covariance_invariants() -> Result<CheckResult> {
    let model = kinematic_model(0.001, 1.5, 1.0, CMode::Identity)?;
    let controls = control_schedule(40.0, 0.2, 500)?;
    let traj = model.simulate(&Vector::zeros(3), &controls, 77)?;
    let initial = BeliefState::new(Vector::zeros(3), Mat::identity(3))?;
    let steps = filter_steps(&model, &initial, &traj)?;
    let mut all_psd = true;
    for s in &steps {
        all_psd &= is_psd(&s.predicted.covariance, 1e-8)?;
        all_psd &= is_psd(&s.posterior.covariance, 1e-8)?;
    }

    // scalar stationary model: filter covariance must land on the fixed
    // point of the covariance recursion, found here by direct iteration
    let (a, c, q, r) = (0.9, 1.0, 0.5, 0.8);
    let scalar = LinearGaussianModel::new(
        Mat::new(1, 1, vec![a])?,
        Mat::new(1, 1, vec![0.0])?,
        Mat::new(1, 1, vec![c])?,
        Mat::new(1, 1, vec![q])?,
        Mat::new(1, 1, vec![r])?,
    )?;
    let mut p = 1.0f64;
    for _ in 0..10_000 {
        let pred = a * p * a + q;
        let k = pred * c / (c * pred * c + r);
        p = (1.0 - k * c) * pred;
    }
    let controls = control_schedule(0.0, 0.0, 2000)?;
    let straj = scalar.simulate(&Vector::zeros(1), &controls, 7)?;
    let sinit = BeliefState::new(Vector::zeros(1), Mat::identity(1))?;
    let ssteps = filter_steps(&scalar, &sinit, &straj)?;
    let final_cov = ssteps.last().unwrap().posterior.covariance.get(0, 0);
    let riccati_ok = (final_cov - p).abs() < 1e-9;

    Ok(CheckResult {
        name: "covariance_invariants",
        passed: all_psd && riccati_ok,
        detail: format!(
            "all covariances PSD: {all_psd}; |filter − fixed point| = {:e}",
            (final_cov - p).abs()
        ),
    })
}

/// Run every check; a corrupted run must report at least one failure.
pub fn run(opts: &SelftestOptions) -> Result<Vec<CheckResult>> {
    Ok(vec![
        check_gradients(opts)?,
        check_map_equivalence()?,
        check_covariance_invariants()?,
    ])
}
