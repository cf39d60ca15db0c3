//! Experiment harness on the constant-acceleration tracking task: tracking
//! comparison between the exact and gradient filters, online learning of the
//! dynamics/control matrices, and the observation-matrix learning failure
//! mode (loss falls while tracking degrades).

use crate::analytic::{filter_steps, BeliefState};
use crate::error::{Error, Result};
use crate::gradient::{step, GradientFilterState, InferenceConfig};
use crate::linalg::{spd_inverse, Mat, Vector};
use crate::model::{
    control_schedule, kinematic_model, seeded_stream, standard_normal_mat, CMode, Trajectory,
    STREAM_INIT_MATRICES,
};

/// Which matrices the gradient filter starts from scratch on and learns.
/// The randomized matrices are always exactly the learned ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    None,
    LearnA,
    LearnB,
    LearnAB,
    LearnC,
}

impl Scenario {
    pub fn learns(&self) -> (bool, bool, bool) {
        match self {
            Scenario::None => (false, false, false),
            Scenario::LearnA => (true, false, false),
            Scenario::LearnB => (false, true, false),
            Scenario::LearnAB => (true, true, false),
            Scenario::LearnC => (false, false, true),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scenario::None => "none",
            Scenario::LearnA => "a",
            Scenario::LearnB => "b",
            Scenario::LearnAB => "ab",
            Scenario::LearnC => "c",
        }
    }
}

/// Choice of the dynamical-error precision Π_x.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PiXMode {
    /// Inverse of the exact filter's predicted covariance at each step; with
    /// this weighting the converged gradient filter coincides with the exact
    /// filter, so it is the default for tracking comparisons.
    Analytic,
    /// Constant Σ_ω⁻¹; the default for learning runs.
    Fixed,
}

/// Full description of one run. Defaults give a well-conditioned regime
/// where five gradient steps track the exact filter closely and the default
/// learning rates are stable (see README for how they were chosen).
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub dt: f64,
    pub q_std: f64,
    pub r_std: f64,
    pub c_mode: CMode,
    pub u0: f64,
    pub decay: f64,
    pub inference: InferenceConfig,
    pub scenario: Scenario,
    pub pi_x_mode: Option<PiXMode>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            horizon: 2000,
            dt: 0.001,
            q_std: 1.5,
            r_std: 1.0,
            c_mode: CMode::Identity,
            u0: 40.0,
            decay: 0.2,
            inference: InferenceConfig::default(),
            scenario: Scenario::None,
            pi_x_mode: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn effective_pi_x_mode(&self) -> PiXMode {
        self.pi_x_mode.unwrap_or(match self.scenario {
            Scenario::None => PiXMode::Analytic,
            _ => PiXMode::Fixed,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TimestepRecord {
    pub t: usize,
    pub x_true: Vector,
    pub y: Vector,
    pub mu_kf: Vector,
    pub mu_gkf: Vector,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct MatrixSnapshot {
    pub a_hat: Mat,
    pub b_hat: Mat,
    pub c_hat: Mat,
}

/// Summary metrics; the per-dimension vectors are indexed by state dimension.
#[derive(Clone, Debug)]
pub struct Metrics {
    pub rmse_gradient_vs_truth: Vec<f64>,
    pub rmse_analytic_vs_truth: Vec<f64>,
    pub rmse_gradient_vs_analytic: Vec<f64>,
    pub rmse_gradient_vs_truth_all: f64,
    pub rmse_analytic_vs_truth_all: f64,
    pub rmse_gradient_vs_analytic_all: f64,
    pub loss_initial_window_mean: f64,
    pub loss_final_window_mean: f64,
    /// Frozen-random baseline (learning scenarios only).
    pub rmse_frozen_vs_truth_all: Option<f64>,
    pub final_window_rmse_gradient_vs_truth: Option<f64>,
    pub final_window_rmse_frozen_vs_truth: Option<f64>,
    /// Gradient filter with the true matrices on the same data
    /// (learning scenarios only).
    pub rmse_true_matrices_vs_truth_all: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<TimestepRecord>,
    /// Estimates of the frozen-random baseline, aligned with `records`.
    pub frozen_baseline_mu: Option<Vec<Vector>>,
    /// Estimates of the true-matrices gradient filter, aligned with `records`.
    pub true_baseline_mu: Option<Vec<Vector>>,
    pub initial_matrices: MatrixSnapshot,
    pub final_matrices: MatrixSnapshot,
    pub metrics: Metrics,
}

/// FNV-1a over the observation bytes; used to assert that every filter in a
/// comparison consumed identical data.
pub fn observation_hash(traj: &Trajectory) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for y in &traj.observations {
        for v in y.as_slice() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
    }
    h
}

/// Root-mean-square error per dimension over a trace.
pub fn rmse_per_dim(estimates: &[Vector], truth: &[Vector]) -> Vec<f64> {
    let n = truth[0].dim();
    let mut acc = vec![0.0; n];
    for (e, x) in estimates.iter().zip(truth) {
        for i in 0..n {
            let d = e.get(i) - x.get(i);
            acc[i] += d * d;
        }
    }
    acc.iter()
        .map(|s| (s / truth.len() as f64).sqrt())
        .collect()
}

/// RMSE over all dimensions flattened.
pub fn rmse_all(estimates: &[Vector], truth: &[Vector]) -> f64 {
    let n = truth[0].dim();
    let per_dim = rmse_per_dim(estimates, truth);
    (per_dim.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt()
}

fn window_len(horizon: usize) -> usize {
    (horizon / 10).max(1)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn build_initial_state(
    model: &crate::model::LinearGaussianModel,
    cfg: &ExperimentConfig,
    pi_x: Mat,
    pi_z: Mat,
) -> Result<GradientFilterState> {
    let (learn_a, learn_b, learn_c) = cfg.scenario.learns();
    let mut rng = seeded_stream(cfg.seed, STREAM_INIT_MATRICES);
    // draw in a fixed order so adding a scenario never reshuffles another's init
    let a_hat = if learn_a {
        standard_normal_mat(&mut rng, 3, 3)
    } else {
        model.a.clone()
    };
    let b_hat = if learn_b {
        standard_normal_mat(&mut rng, 3, 1)
    } else {
        model.b.clone()
    };
    let c_hat = if learn_c {
        standard_normal_mat(&mut rng, 3, 3)
    } else {
        model.c.clone()
    };
    GradientFilterState::new(a_hat, b_hat, c_hat, pi_x, pi_z, Vector::zeros(3))
}

/// Run the gradient filter over the whole trajectory. `predicted_covs` feeds
/// the analytic Π_x mode; `learn` enables the scenario's weight updates.
fn run_gradient_filter(
    mut state: GradientFilterState,
    traj: &Trajectory,
    cfg: &ExperimentConfig,
    predicted_covs: Option<&[Mat]>,
    learn: bool,
) -> Result<(Vec<Vector>, Vec<f64>, MatrixSnapshot)> {
    let (learn_a, learn_b, learn_c) = cfg.scenario.learns();
    let inf_cfg = InferenceConfig {
        learn_a: learn && learn_a,
        learn_b: learn && learn_b,
        learn_c: learn && learn_c,
        ..cfg.inference.clone()
    };
    let mut mus = Vec::with_capacity(traj.horizon());
    let mut losses = Vec::with_capacity(traj.horizon());
    for t in 0..traj.horizon() {
        if let Some(covs) = predicted_covs {
            state.pi_x = spd_inverse(&covs[t])?.symmetrize();
        }
        let diag = step(&mut state, &traj.controls[t], &traj.observations[t], &inf_cfg)
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::LearningDivergence { timestep: t },
                other => other,
            })?;
        mus.push(diag.mu);
        losses.push(diag.loss_after);
    }
    let final_matrices = MatrixSnapshot {
        a_hat: state.a_hat,
        b_hat: state.b_hat,
        c_hat: state.c_hat,
    };
    Ok((mus, losses, final_matrices))
}

fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_inner(cfg, None)
}

fn run_inner(cfg: &ExperimentConfig, external: Option<&Trajectory>) -> Result<ExperimentResult> {
    cfg.inference.validate()?;
    if cfg.horizon == 0 {
        return Err(Error::InvalidArgument {
            op: "experiment::run",
            reason: "horizon must be at least 1".into(),
        });
    }
    let model = kinematic_model(cfg.dt, cfg.q_std, cfg.r_std, cfg.c_mode)?;
    let traj = match external {
        Some(t) => {
            if t.horizon() != cfg.horizon {
                return Err(Error::InvalidArgument {
                    op: "experiment::run",
                    reason: format!(
                        "trajectory horizon {} does not match configured horizon {}",
                        t.horizon(),
                        cfg.horizon
                    ),
                });
            }
            let dims_ok = t.states.iter().all(|x| x.dim() == model.state_dim())
                && t.controls.iter().all(|u| u.dim() == model.control_dim())
                && t.observations.iter().all(|y| y.dim() == model.obs_dim());
            if !dims_ok {
                return Err(Error::InvalidArgument {
                    op: "experiment::run",
                    reason: "trajectory dimensions do not match the model".into(),
                });
            }
            t.clone()
        }
        None => {
            let controls = control_schedule(cfg.u0, cfg.decay, cfg.horizon)?;
            model.simulate(&Vector::zeros(3), &controls, cfg.seed)?
        }
    };
    let obs_hash = observation_hash(&traj);

    // exact filter
    let initial_belief = BeliefState::new(Vector::zeros(3), Mat::identity(3))?;
    let kf_steps = filter_steps(&model, &initial_belief, &traj)?;
    let predicted_covs: Vec<Mat> = kf_steps
        .iter()
        .map(|s| s.predicted.covariance.clone())
        .collect();
    let kf_means: Vec<Vector> = kf_steps.iter().map(|s| s.posterior.mean.clone()).collect();

    // gradient filter
    let pi_z = spd_inverse(&model.sigma_z)?.symmetrize();
    let pi_x_mode = cfg.effective_pi_x_mode();
    // in analytic mode the per-step precision overwrites this before use
    let initial_pi_x = match pi_x_mode {
        PiXMode::Fixed => spd_inverse(&model.sigma_omega)?.symmetrize(),
        PiXMode::Analytic => Mat::identity(3),
    };
    let covs_arg = match pi_x_mode {
        PiXMode::Analytic => Some(predicted_covs.as_slice()),
        PiXMode::Fixed => None,
    };
    let initial_state = build_initial_state(&model, cfg, initial_pi_x.clone(), pi_z.clone())?;
    let initial_matrices = MatrixSnapshot {
        a_hat: initial_state.a_hat.clone(),
        b_hat: initial_state.b_hat.clone(),
        c_hat: initial_state.c_hat.clone(),
    };

    assert_eq!(
        observation_hash(&traj),
        obs_hash,
        "filters must consume identical observations"
    );
    let (gkf_means, losses, final_matrices) =
        run_gradient_filter(initial_state.clone(), &traj, cfg, covs_arg, true)?;

    // learning scenarios carry two baselines on the same data
    let is_learning = cfg.scenario != Scenario::None;
    let (frozen_mu, true_mu) = if is_learning {
        assert_eq!(
            observation_hash(&traj),
            obs_hash,
            "filters must consume identical observations"
        );
        let (frozen, _, _) =
            run_gradient_filter(initial_state.clone(), &traj, cfg, covs_arg, false)?;
        let true_state = GradientFilterState::new(
            model.a.clone(),
            model.b.clone(),
            model.c.clone(),
            initial_pi_x.clone(),
            pi_z.clone(),
            Vector::zeros(3),
        )?;
        let (truth_filter, _, _) = run_gradient_filter(true_state, &traj, cfg, covs_arg, false)?;
        (Some(frozen), Some(truth_filter))
    } else {
        (None, None)
    };

    let truth = &traj.states[1..];
    let records: Vec<TimestepRecord> = (0..cfg.horizon)
        .map(|t| TimestepRecord {
            t: t + 1,
            x_true: truth[t].clone(),
            y: traj.observations[t].clone(),
            mu_kf: kf_means[t].clone(),
            mu_gkf: gkf_means[t].clone(),
            loss: losses[t],
        })
        .collect();

    let w = window_len(cfg.horizon);
    let metrics = Metrics {
        rmse_gradient_vs_truth: rmse_per_dim(&gkf_means, truth),
        rmse_analytic_vs_truth: rmse_per_dim(&kf_means, truth),
        rmse_gradient_vs_analytic: rmse_per_dim(&gkf_means, &kf_means),
        rmse_gradient_vs_truth_all: rmse_all(&gkf_means, truth),
        rmse_analytic_vs_truth_all: rmse_all(&kf_means, truth),
        rmse_gradient_vs_analytic_all: rmse_all(&gkf_means, &kf_means),
        loss_initial_window_mean: mean(&losses[..w]),
        loss_final_window_mean: mean(&losses[losses.len() - w..]),
        rmse_frozen_vs_truth_all: frozen_mu.as_ref().map(|f| rmse_all(f, truth)),
        final_window_rmse_gradient_vs_truth: if is_learning {
            Some(rmse_all(
                &gkf_means[gkf_means.len() - w..],
                &truth[truth.len() - w..],
            ))
        } else {
            None
        },
        final_window_rmse_frozen_vs_truth: frozen_mu.as_ref().map(|f| {
            rmse_all(&f[f.len() - w..], &truth[truth.len() - w..])
        }),
        rmse_true_matrices_vs_truth_all: true_mu.as_ref().map(|f| rmse_all(f, truth)),
    };
    for r in metrics.rmse_gradient_vs_truth.iter().chain(
        metrics
            .rmse_analytic_vs_truth
            .iter()
            .chain(metrics.rmse_gradient_vs_analytic.iter()),
    ) {
        if !r.is_finite() {
            return Err(Error::NonFinite {
                op: "experiment metrics",
            });
        }
    }

    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        frozen_baseline_mu: frozen_mu,
        true_baseline_mu: true_mu,
        initial_matrices,
        final_matrices,
        metrics,
    })
}

/// Tracking comparison with the true matrices (no learning).
pub fn run_tracking(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.scenario != Scenario::None {
        return Err(Error::InvalidArgument {
            op: "run_tracking",
            reason: "scenario must be none".into(),
        });
    }
    run(cfg)
}

/// Tracking comparison on a caller-supplied trajectory (e.g. one loaded from
/// CSV) instead of a freshly simulated one.
pub fn run_tracking_on(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<ExperimentResult> {
    if cfg.scenario != Scenario::None {
        return Err(Error::InvalidArgument {
            op: "run_tracking_on",
            reason: "scenario must be none".into(),
        });
    }
    run_inner(cfg, Some(traj))
}

/// Online learning of A, B or both, with frozen-random and true-matrix
/// baselines on the same trajectory.
pub fn run_learning(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.scenario {
        Scenario::LearnA | Scenario::LearnB | Scenario::LearnAB => run(cfg),
        _ => Err(Error::InvalidArgument {
            op: "run_learning",
            reason: "scenario must be a, b or ab".into(),
        }),
    }
}

/// Observation-matrix learning: reproduces the failure mode where the loss
/// keeps falling while state tracking is poor.
pub fn run_c_failure(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.scenario != Scenario::LearnC {
        return Err(Error::InvalidArgument {
            op: "run_c_failure",
            reason: "scenario must be c".into(),
        });
    }
    run(cfg)
}

/// Dispatch on the configured scenario.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.scenario {
        Scenario::None => run_tracking(cfg),
        Scenario::LearnC => run_c_failure(cfg),
        _ => run_learning(cfg),
    }
}

/// Deterministic `key = value` metric block.
pub fn summarize(result: &ExperimentResult) -> String {
    let m = &result.metrics;
    let mut pairs: Vec<(String, String)> = Vec::new();
    let fmt = crate::textio::fmt_f64;
    for (name, vals) in [
        ("rmse_gradient_vs_truth", &m.rmse_gradient_vs_truth),
        ("rmse_analytic_vs_truth", &m.rmse_analytic_vs_truth),
        ("rmse_gradient_vs_analytic", &m.rmse_gradient_vs_analytic),
    ] {
        for (i, v) in vals.iter().enumerate() {
            pairs.push((format!("{name}_{i}"), fmt(*v)));
        }
    }
    pairs.push((
        "rmse_gradient_vs_truth_all".into(),
        fmt(m.rmse_gradient_vs_truth_all),
    ));
    pairs.push((
        "rmse_analytic_vs_truth_all".into(),
        fmt(m.rmse_analytic_vs_truth_all),
    ));
    pairs.push((
        "rmse_gradient_vs_analytic_all".into(),
        fmt(m.rmse_gradient_vs_analytic_all),
    ));
    pairs.push((
        "loss_initial_window_mean".into(),
        fmt(m.loss_initial_window_mean),
    ));
    pairs.push((
        "loss_final_window_mean".into(),
        fmt(m.loss_final_window_mean),
    ));
    if let Some(v) = m.rmse_frozen_vs_truth_all {
        pairs.push(("rmse_frozen_vs_truth_all".into(), fmt(v)));
    }
    if let Some(v) = m.final_window_rmse_gradient_vs_truth {
        pairs.push(("final_window_rmse_gradient_vs_truth".into(), fmt(v)));
    }
    if let Some(v) = m.final_window_rmse_frozen_vs_truth {
        pairs.push(("final_window_rmse_frozen_vs_truth".into(), fmt(v)));
    }
    if let Some(v) = m.rmse_true_matrices_vs_truth_all {
        pairs.push(("rmse_true_matrices_vs_truth_all".into(), fmt(v)));
    }
    crate::textio::kv_block(&pairs)
}
