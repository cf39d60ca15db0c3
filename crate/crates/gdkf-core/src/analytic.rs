//! Exact Kalman filter: project/correct recursion plus a closed-form MAP
//! solver that reaches the same posterior mean through an independent code
//! path (normal equations instead of the gain), used to cross-check both.

use crate::error::{Error, Result};
use crate::linalg::{is_psd, solve_spd, solve_spd_mat, Mat, Vector};
use crate::model::{LinearGaussianModel, Trajectory};

/// Gaussian belief over the state: mean μ and covariance Σ_x.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    pub mean: Vector,
    pub covariance: Mat,
}

impl BeliefState {
    pub fn new(mean: Vector, covariance: Mat) -> Result<Self> {
        if covariance.rows() != mean.dim() || covariance.cols() != mean.dim() {
            return Err(Error::DimMismatch {
                op: "BeliefState::new",
                lhs_rows: mean.dim(),
                lhs_cols: 1,
                rhs_rows: covariance.rows(),
                rhs_cols: covariance.cols(),
            });
        }
        if !is_psd(&covariance, 1e-8)? {
            return Err(Error::InvalidArgument {
                op: "BeliefState::new",
                reason: "covariance must be symmetric PSD".into(),
            });
        }
        Ok(BeliefState { mean, covariance })
    }
}

/// One filter step's intermediate and final belief.
#[derive(Clone, Debug)]
pub struct FilterStep {
    pub predicted: BeliefState,
    pub posterior: BeliefState,
}

/// Projection: mean A·μ + B·u, covariance A·Σ·Aᵀ + Σ_ω.
pub fn project(model: &LinearGaussianModel, belief: &BeliefState, u: &Vector) -> Result<BeliefState> {
    let mean = model.a.mul_vec(&belief.mean)?.add(&model.b.mul_vec(u)?)?;
    let cov = model
        .a
        .matmul(&belief.covariance)?
        .matmul(&model.a.transpose())?
        .add(&model.sigma_omega)?
        .symmetrize();
    Ok(BeliefState {
        mean,
        covariance: cov,
    })
}

/// Gain K solving K·(C·Σ̂·Cᵀ + Σ_z) = Σ̂·Cᵀ.
///
/// The innovation covariance is inverted only implicitly, through an SPD
/// solve; a singular innovation covariance (degenerate observation noise)
/// surfaces as a not-positive-definite error.
pub fn kalman_gain(model: &LinearGaussianModel, predicted_cov: &Mat) -> Result<Mat> {
    let c_t = model.c.transpose();
    let cov_ct = predicted_cov.matmul(&c_t)?; // Σ̂·Cᵀ, n×m
    let innovation_cov = model
        .c
        .matmul(&cov_ct)?
        .add(&model.sigma_z)?
        .symmetrize();
    // K = Σ̂·Cᵀ·S⁻¹ computed as (S⁻¹·(Σ̂·Cᵀ)ᵀ)ᵀ with S symmetric
    let x = solve_spd_mat(&innovation_cov, &cov_ct.transpose())?;
    Ok(x.transpose())
}

/// Correction: mean μ̂ + K(y − C·μ̂), covariance (I − K·C)·Σ̂, re-symmetrized.
pub fn correct(model: &LinearGaussianModel, predicted: &BeliefState, y: &Vector) -> Result<BeliefState> {
    let k = kalman_gain(model, &predicted.covariance)?;
    let innovation = y.sub(&model.c.mul_vec(&predicted.mean)?)?;
    let mean = predicted.mean.add(&k.mul_vec(&innovation)?)?;
    let n = predicted.mean.dim();
    let cov = Mat::identity(n)
        .sub(&k.matmul(&model.c)?)?
        .matmul(&predicted.covariance)?
        .symmetrize();
    Ok(BeliefState {
        mean,
        covariance: cov,
    })
}

/// Run the project/correct recursion over a whole trajectory; returns the
/// predicted and posterior belief for every timestep.
pub fn filter_steps(
    model: &LinearGaussianModel,
    initial: &BeliefState,
    traj: &Trajectory,
) -> Result<Vec<FilterStep>> {
    let mut belief = initial.clone();
    let mut steps = Vec::with_capacity(traj.horizon());
    for t in 0..traj.horizon() {
        let predicted = project(model, &belief, &traj.controls[t])?;
        let posterior = correct(model, &predicted, &traj.observations[t])?;
        belief = posterior.clone();
        steps.push(FilterStep {
            predicted,
            posterior,
        });
    }
    Ok(steps)
}

/// Posterior beliefs only.
pub fn filter_trajectory(
    model: &LinearGaussianModel,
    initial: &BeliefState,
    traj: &Trajectory,
) -> Result<Vec<BeliefState>> {
    Ok(filter_steps(model, initial, traj)?
        .into_iter()
        .map(|s| s.posterior)
        .collect())
}

/// Closed-form MAP posterior mean via the normal equations:
/// (CᵀRC + Π_x)·μ = CᵀR·y + Π_x·(A·μ_t + B·u), with R the observation
/// precision and Π_x the prior (predicted-state) precision.
pub fn map_solve(
    model: &LinearGaussianModel,
    mu_t: &Vector,
    u: &Vector,
    prior_precision: &Mat,
    obs_precision: &Mat,
    y: &Vector,
) -> Result<Vector> {
    let prior_mean = model.a.mul_vec(mu_t)?.add(&model.b.mul_vec(u)?)?;
    let ct_r = model.c.transpose().matmul(obs_precision)?;
    let normal = ct_r
        .matmul(&model.c)?
        .add(prior_precision)?
        .symmetrize();
    let rhs = ct_r
        .mul_vec(y)?
        .add(&prior_precision.mul_vec(&prior_mean)?)?;
    solve_spd(&normal, &rhs)
}
