//! Linear-Gaussian state-space model and seeded trajectory simulation.
//!
//! Dynamics: x_{t+1} = A·x_t + B·u_t + ω,   ω ~ N(0, Σ_ω)
//! Sensing:  y_{t+1} = C·x_{t+1} + z,       z ~ N(0, Σ_z)

use crate::error::{Error, Result};
use crate::linalg::{is_psd, psd_factor, Mat, Vector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream ids for the labeled RNG split; all randomness in a run flows from
/// one seed, with one ChaCha8 stream per purpose.
const STREAM_PROCESS_NOISE: u64 = 0;
const STREAM_OBS_NOISE: u64 = 1;
const STREAM_C_MATRIX: u64 = 2;
pub(crate) const STREAM_INIT_MATRICES: u64 = 3;

pub(crate) fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn standard_normal_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, rng.sample(StandardNormal));
        }
    }
    m
}

/// How the observation matrix of the kinematic benchmark model is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CMode {
    Identity,
    /// 3×3 with i.i.d. standard-normal entries drawn from the given seed.
    Random(u64),
}

/// The generative truth: dynamics A (n×n), control B (n×k), observation
/// C (m×n) and the two noise covariances.
#[derive(Clone, Debug)]
pub struct LinearGaussianModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub sigma_omega: Mat,
    pub sigma_z: Mat,
}

impl LinearGaussianModel {
    pub fn new(a: Mat, b: Mat, c: Mat, sigma_omega: Mat, sigma_z: Mat) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::NotSquare {
                op: "LinearGaussianModel::new (A)",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if b.rows() != n {
            return Err(Error::DimMismatch {
                op: "LinearGaussianModel::new (B vs A)",
                lhs_rows: n,
                lhs_cols: n,
                rhs_rows: b.rows(),
                rhs_cols: b.cols(),
            });
        }
        if c.cols() != n {
            return Err(Error::DimMismatch {
                op: "LinearGaussianModel::new (C vs A)",
                lhs_rows: n,
                lhs_cols: n,
                rhs_rows: c.rows(),
                rhs_cols: c.cols(),
            });
        }
        let m = c.rows();
        if sigma_omega.rows() != n || sigma_omega.cols() != n {
            return Err(Error::DimMismatch {
                op: "LinearGaussianModel::new (sigma_omega)",
                lhs_rows: n,
                lhs_cols: n,
                rhs_rows: sigma_omega.rows(),
                rhs_cols: sigma_omega.cols(),
            });
        }
        if sigma_z.rows() != m || sigma_z.cols() != m {
            return Err(Error::DimMismatch {
                op: "LinearGaussianModel::new (sigma_z)",
                lhs_rows: m,
                lhs_cols: m,
                rhs_rows: sigma_z.rows(),
                rhs_cols: sigma_z.cols(),
            });
        }
        for (name, cov) in [("sigma_omega", &sigma_omega), ("sigma_z", &sigma_z)] {
            if !is_psd(cov, 1e-10)? {
                return Err(Error::InvalidArgument {
                    op: "LinearGaussianModel::new",
                    reason: format!("{name} must be symmetric PSD"),
                });
            }
        }
        Ok(LinearGaussianModel {
            a,
            b,
            c,
            sigma_omega,
            sigma_z,
        })
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Control dimension k.
    pub fn control_dim(&self) -> usize {
        self.b.cols()
    }

    /// Observation dimension m.
    pub fn obs_dim(&self) -> usize {
        self.c.rows()
    }

    /// One dynamics step: A·x + B·u + noise.
    pub fn step_dynamics(&self, x: &Vector, u: &Vector, noise: &Vector) -> Result<Vector> {
        self.a
            .mul_vec(x)?
            .add(&self.b.mul_vec(u)?)?
            .add(noise)
    }

    /// One observation: C·x + noise.
    pub fn observe(&self, x: &Vector, noise: &Vector) -> Result<Vector> {
        self.c.mul_vec(x)?.add(noise)
    }

    /// Roll the model forward under `controls`, drawing process and
    /// observation noise from two deterministic streams of `seed`.
    /// The same (model, x0, controls, seed) always yields the same bytes.
    pub fn simulate(&self, x0: &Vector, controls: &[Vector], seed: u64) -> Result<Trajectory> {
        if controls.is_empty() {
            return Err(Error::InvalidArgument {
                op: "simulate",
                reason: "controls must be non-empty".into(),
            });
        }
        let n = self.state_dim();
        let m = self.obs_dim();
        let l_omega = psd_factor(&self.sigma_omega)?;
        let l_z = psd_factor(&self.sigma_z)?;
        let mut rng_proc = seeded_stream(seed, STREAM_PROCESS_NOISE);
        let mut rng_obs = seeded_stream(seed, STREAM_OBS_NOISE);

        let mut states = Vec::with_capacity(controls.len() + 1);
        let mut observations = Vec::with_capacity(controls.len());
        states.push(x0.clone());
        let mut x = x0.clone();
        for (t, u) in controls.iter().enumerate() {
            let w = l_omega.mul_vec(&standard_normal_mat(&mut rng_proc, n, 1).column(0))?;
            let z = l_z.mul_vec(&standard_normal_mat(&mut rng_obs, m, 1).column(0))?;
            x = self.step_dynamics(&x, u, &w)?;
            if !x.is_finite() {
                return Err(Error::Divergence { step: t });
            }
            observations.push(self.observe(&x, &z)?);
            states.push(x.clone());
        }
        Ok(Trajectory {
            states,
            controls: controls.to_vec(),
            observations,
            seed,
        })
    }
}

/// A simulated run: x_0..x_T, u_0..u_{T−1}, y_1..y_T (observation t measures
/// state t+1) and the seed it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub observations: Vec<Vector>,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }
}

/// Constant-acceleration kinematic benchmark model: position, velocity,
/// acceleration state, scalar control driving acceleration.
///
/// A = [[1, dt, dt²/2], [0, 1, dt], [0, 0, 1]],  B = [0, 0, 1]ᵀ,
/// Σ_ω = q_std²·I₃, Σ_z = r_std²·I₃, C per `c_mode`.
pub fn kinematic_model(dt: f64, q_std: f64, r_std: f64, c_mode: CMode) -> Result<LinearGaussianModel> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument {
            op: "kinematic_model",
            reason: format!("dt must be positive, got {dt}"),
        });
    }
    if q_std < 0.0 || r_std < 0.0 {
        return Err(Error::InvalidArgument {
            op: "kinematic_model",
            reason: "noise std must be non-negative".into(),
        });
    }
    let a = Mat::from_rows(&[
        &[1.0, dt, dt * dt / 2.0],
        &[0.0, 1.0, dt],
        &[0.0, 0.0, 1.0],
    ])?;
    let b = Mat::new(3, 1, vec![0.0, 0.0, 1.0])?;
    let c = match c_mode {
        CMode::Identity => Mat::identity(3),
        CMode::Random(seed) => {
            let mut rng = seeded_stream(seed, STREAM_C_MATRIX);
            standard_normal_mat(&mut rng, 3, 3)
        }
    };
    LinearGaussianModel::new(
        a,
        b,
        c,
        Mat::identity(3).scale(q_std * q_std),
        Mat::identity(3).scale(r_std * r_std),
    )
}

/// Exponentially decaying scalar control: u_t = u0·exp(−decay·t).
pub fn control_schedule(u0: f64, decay: f64, horizon: usize) -> Result<Vec<Vector>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument {
            op: "control_schedule",
            reason: "horizon must be at least 1".into(),
        });
    }
    if decay < 0.0 {
        return Err(Error::InvalidArgument {
            op: "control_schedule",
            reason: format!("decay must be non-negative, got {decay}"),
        });
    }
    Ok((0..horizon)
        .map(|t| Vector::new(vec![u0 * (-decay * t as f64).exp()]).unwrap())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model(n: usize) -> LinearGaussianModel {
        LinearGaussianModel::new(
            Mat::identity(n),
            Mat::zeros(n, 1),
            Mat::identity(n),
            Mat::zeros(n, n),
            Mat::zeros(n, n),
        )
        .unwrap()
    }

    #[test]
    fn step_identity_dynamics_keeps_state() {
        let model = identity_model(3);
        let x = Vector::new(vec![1.0, -2.0, 0.5]).unwrap();
        let out = model
            .step_dynamics(&x, &Vector::zeros(1), &Vector::zeros(3))
            .unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn step_scalar_hand_example() {
        let model = LinearGaussianModel::new(
            Mat::new(1, 1, vec![2.0]).unwrap(),
            Mat::new(1, 1, vec![1.0]).unwrap(),
            Mat::identity(1),
            Mat::zeros(1, 1),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let out = model
            .step_dynamics(
                &Vector::new(vec![1.0]).unwrap(),
                &Vector::new(vec![3.0]).unwrap(),
                &Vector::zeros(1),
            )
            .unwrap();
        assert_eq!(out.as_slice(), &[5.0]);
    }

    #[test]
    fn kinematic_step_pure_velocity() {
        let model = kinematic_model(0.01, 0.0, 0.0, CMode::Identity).unwrap();
        let out = model
            .step_dynamics(
                &Vector::new(vec![0.0, 1.0, 0.0]).unwrap(),
                &Vector::zeros(1),
                &Vector::zeros(3),
            )
            .unwrap();
        assert!((out.get(0) - 0.01).abs() < 1e-15);
        assert!((out.get(1) - 1.0).abs() < 1e-15);
        assert_eq!(out.get(2), 0.0);
    }

    #[test]
    fn kinematic_matrix_shape() {
        let model = kinematic_model(1.0, 1.0, 1.0, CMode::Identity).unwrap();
        assert_eq!(model.a.get(0, 0), 1.0);
        assert_eq!(model.a.get(0, 1), 1.0);
        assert_eq!(model.a.get(0, 2), 0.5);
        assert_eq!(model.b.data(), &[0.0, 0.0, 1.0]);
        assert_eq!(model.c, Mat::identity(3));
        // upper triangular, unit diagonal => det 1
        for i in 0..3 {
            assert_eq!(model.a.get(i, i), 1.0);
            for j in 0..i {
                assert_eq!(model.a.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn observe_examples() {
        let model = identity_model(3);
        let x = Vector::new(vec![3.0, 4.0, 5.0]).unwrap();
        assert_eq!(model.observe(&x, &Vector::zeros(3)).unwrap(), x);

        let selector = LinearGaussianModel::new(
            Mat::identity(3),
            Mat::zeros(3, 1),
            Mat::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap(),
            Mat::zeros(3, 3),
            Mat::zeros(1, 1),
        )
        .unwrap();
        assert_eq!(
            selector.observe(&x, &Vector::zeros(1)).unwrap().as_slice(),
            &[3.0]
        );
    }

    #[test]
    fn observe_matches_matmul_on_random_c() {
        let model = kinematic_model(0.01, 0.0, 0.0, CMode::Random(11)).unwrap();
        let x = Vector::new(vec![0.7, -1.1, 2.2]).unwrap();
        let y = model.observe(&x, &Vector::zeros(3)).unwrap();
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += model.c.get(i, j) * x.get(j);
            }
            assert!((y.get(i) - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_noise_simulate_equals_manual_rollout() {
        let model = kinematic_model(0.01, 0.0, 0.0, CMode::Identity).unwrap();
        let controls = control_schedule(10.0, 0.05, 50).unwrap();
        let traj = model.simulate(&Vector::zeros(3), &controls, 123).unwrap();
        let mut x = Vector::zeros(3);
        for t in 0..50 {
            x = model
                .step_dynamics(&x, &controls[t], &Vector::zeros(3))
                .unwrap();
            assert_eq!(traj.states[t + 1], x);
            assert_eq!(traj.observations[t], x);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let model = kinematic_model(0.01, 1.0, 1.0, CMode::Identity).unwrap();
        let controls = control_schedule(10.0, 0.05, 100).unwrap();
        let a = model.simulate(&Vector::zeros(3), &controls, 7).unwrap();
        let b = model.simulate(&Vector::zeros(3), &controls, 7).unwrap();
        assert_eq!(a, b);
        let c = model.simulate(&Vector::zeros(3), &controls, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn process_noise_sample_covariance_matches_sigma() {
        // 1e5 one-step draws; sample covariance within 5% of Σ_ω = q²I
        let q = 1.5;
        let model = kinematic_model(0.01, q, 0.0, CMode::Identity).unwrap();
        let controls = control_schedule(0.0, 0.0, 1).unwrap();
        let n_draws = 100_000;
        let mut cov = [[0.0f64; 3]; 3];
        for seed in 0..n_draws {
            let traj = model.simulate(&Vector::zeros(3), &controls, seed).unwrap();
            // with A applied to x0 = 0 and u = 0, x1 is exactly the noise draw
            let w = &traj.states[1];
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += w.get(i) * w.get(j);
                }
            }
        }
        for (i, row) in cov.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let est = v / n_draws as f64;
                let want = if i == j { q * q } else { 0.0 };
                assert!(
                    (est - want).abs() <= 0.05 * q * q,
                    "cov[{i}][{j}] = {est}, want {want}"
                );
            }
        }
    }

    #[test]
    fn control_schedule_shapes() {
        let constant = control_schedule(10.0, 0.0, 5).unwrap();
        assert!(constant.iter().all(|u| u.as_slice() == [10.0]));

        let halving = control_schedule(1.0, (2.0f64).ln(), 3).unwrap();
        assert!((halving[1].get(0) - 0.5).abs() < 1e-15);

        // geometric series closed form
        let (u0, decay, horizon) = (3.0, 0.25, 40);
        let sched = control_schedule(u0, decay, horizon).unwrap();
        let total: f64 = sched.iter().map(|u| u.get(0)).sum();
        let r = (-decay as f64).exp();
        let closed = u0 * (1.0 - r.powi(horizon as i32)) / (1.0 - r);
        assert!((total - closed).abs() < 1e-9);
    }

    #[test]
    fn invalid_args_rejected() {
        assert!(kinematic_model(0.0, 1.0, 1.0, CMode::Identity).is_err());
        assert!(kinematic_model(0.01, -1.0, 1.0, CMode::Identity).is_err());
        assert!(control_schedule(1.0, 0.0, 0).is_err());
        assert!(control_schedule(1.0, -0.1, 5).is_err());
    }
}
