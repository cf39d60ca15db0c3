//! Gradient-descent filter: per-timestep MAP inference of the state by a few
//! steps of gradient descent on precision-weighted prediction errors, plus
//! online learning of the model matrices from rank-1 (Hebbian) updates.
//!
//! Conventions: the reported loss is the full quadratic
//! ε_zᵀΠ_zε_z + ε_xᵀΠ_xε_x; the update directions use the half-quadratic
//! convention, so the finite-difference gradient of the loss is exactly twice
//! each update direction. Descent behaviour depends only on the direction.

use crate::error::{Error, Result};
use crate::linalg::{is_psd, power_iter_lambda_max, Mat, Vector};

/// Estimated model matrices, precision weights, and the current state
/// estimate. `pi_z` weighs sensory errors, `pi_x` dynamical errors.
#[derive(Clone, Debug)]
pub struct GradientFilterState {
    pub a_hat: Mat,
    pub b_hat: Mat,
    pub c_hat: Mat,
    pub pi_x: Mat,
    pub pi_z: Mat,
    pub mu: Vector,
}

impl GradientFilterState {
    pub fn new(
        a_hat: Mat,
        b_hat: Mat,
        c_hat: Mat,
        pi_x: Mat,
        pi_z: Mat,
        mu: Vector,
    ) -> Result<Self> {
        let n = a_hat.rows();
        if a_hat.cols() != n || b_hat.rows() != n || c_hat.cols() != n || mu.dim() != n {
            return Err(Error::InvalidArgument {
                op: "GradientFilterState::new",
                reason: "A_hat square, B_hat/C_hat/mu consistent with its size required".into(),
            });
        }
        let m = c_hat.rows();
        if pi_x.rows() != n || pi_x.cols() != n || pi_z.rows() != m || pi_z.cols() != m {
            return Err(Error::InvalidArgument {
                op: "GradientFilterState::new",
                reason: "precision shapes must match state/observation dims".into(),
            });
        }
        for (name, p) in [("pi_x", &pi_x), ("pi_z", &pi_z)] {
            if !is_psd(p, 1e-8)? {
                return Err(Error::InvalidArgument {
                    op: "GradientFilterState::new",
                    reason: format!("{name} must be symmetric PSD"),
                });
            }
        }
        Ok(GradientFilterState {
            a_hat,
            b_hat,
            c_hat,
            pi_x,
            pi_z,
            mu,
        })
    }

    /// Curvature bound λ_max(ĈᵀΠ_zĈ + Π_x) of the inference objective;
    /// gradient steps are stable below 2/λ_max.
    pub fn curvature_lambda_max(&self) -> Result<f64> {
        let h = self
            .c_hat
            .transpose()
            .matmul(&self.pi_z)?
            .matmul(&self.c_hat)?
            .add(&self.pi_x)?
            .symmetrize();
        power_iter_lambda_max(&h, 50)
    }
}

/// Inference/learning knobs. `eta_mu = None` selects the automatic step size
/// 1/λ_max of the objective curvature; an explicit value is clamped to that
/// bound so descent cannot be violated by configuration.
#[derive(Clone, Debug)]
pub struct InferenceConfig {
    pub n_steps: usize,
    pub eta_mu: Option<f64>,
    pub lr_a: f64,
    pub lr_b: f64,
    pub lr_c: f64,
    pub learn_a: bool,
    pub learn_b: bool,
    pub learn_c: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            n_steps: 5,
            eta_mu: None,
            lr_a: 1e-5,
            lr_b: 1e-5,
            lr_c: 1e-6,
            learn_a: false,
            learn_b: false,
            learn_c: false,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument {
                op: "InferenceConfig",
                reason: "n_steps must be at least 1".into(),
            });
        }
        if let Some(eta) = self.eta_mu {
            if eta <= 0.0 || !eta.is_finite() {
                return Err(Error::InvalidArgument {
                    op: "InferenceConfig",
                    reason: format!("eta_mu must be positive, got {eta}"),
                });
            }
        }
        if self.lr_a < 0.0 || self.lr_b < 0.0 || self.lr_c < 0.0 {
            return Err(Error::InvalidArgument {
                op: "InferenceConfig",
                reason: "learning rates must be non-negative".into(),
            });
        }
        Ok(())
    }

    /// Step size actually used for a given curvature bound.
    pub fn effective_eta(&self, lambda_max: f64) -> f64 {
        let auto = if lambda_max > 0.0 {
            1.0 / lambda_max
        } else {
            1.0
        };
        match self.eta_mu {
            Some(eta) => eta.min(auto),
            None => auto,
        }
    }
}

/// Residuals of one timestep: dynamical ε_x = μ − Âμ_prev − B̂u and sensory
/// ε_z = y − Ĉμ.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionErrors {
    pub eps_x: Vector,
    pub eps_z: Vector,
}

/// What `step` hands back for logging.
#[derive(Clone, Debug)]
pub struct StepDiagnostics {
    pub mu: Vector,
    pub loss_before: f64,
    pub loss_after: f64,
    pub errors: PredictionErrors,
}

pub fn compute_errors(
    state: &GradientFilterState,
    mu_next: &Vector,
    mu_prev: &Vector,
    u: &Vector,
    y: &Vector,
) -> Result<PredictionErrors> {
    let pred = state.a_hat.mul_vec(mu_prev)?.add(&state.b_hat.mul_vec(u)?)?;
    let eps_x = mu_next.sub(&pred)?;
    let eps_z = y.sub(&state.c_hat.mul_vec(mu_next)?)?;
    Ok(PredictionErrors { eps_x, eps_z })
}

/// ε_zᵀΠ_zε_z + ε_xᵀΠ_xε_x; non-negative for PSD precisions.
pub fn loss(
    state: &GradientFilterState,
    mu_next: &Vector,
    mu_prev: &Vector,
    u: &Vector,
    y: &Vector,
) -> Result<f64> {
    let e = compute_errors(state, mu_next, mu_prev, u, y)?;
    let lz = e.eps_z.dot(&state.pi_z.mul_vec(&e.eps_z)?)?;
    let lx = e.eps_x.dot(&state.pi_x.mul_vec(&e.eps_x)?)?;
    Ok(lz + lx)
}

/// Update direction in μ: −ĈᵀΠ_zε_z + Π_xε_x (half the loss gradient).
pub fn grad_mu(state: &GradientFilterState, errors: &PredictionErrors) -> Result<Vector> {
    let obs_term = state
        .c_hat
        .transpose()
        .mul_vec(&state.pi_z.mul_vec(&errors.eps_z)?)?;
    let dyn_term = state.pi_x.mul_vec(&errors.eps_x)?;
    dyn_term.sub(&obs_term)
}

/// Update direction in Â: −(Π_xε_x)·μ_prevᵀ, a rank-1 outer product.
pub fn grad_a(state: &GradientFilterState, errors: &PredictionErrors, mu_prev: &Vector) -> Result<Mat> {
    Ok(Mat::outer(&state.pi_x.mul_vec(&errors.eps_x)?, mu_prev).scale(-1.0))
}

/// Update direction in B̂: −(Π_xε_x)·uᵀ.
pub fn grad_b(state: &GradientFilterState, errors: &PredictionErrors, u: &Vector) -> Result<Mat> {
    Ok(Mat::outer(&state.pi_x.mul_vec(&errors.eps_x)?, u).scale(-1.0))
}

/// Update direction in Ĉ: −(Π_zε_z)·μ_nextᵀ.
pub fn grad_c(state: &GradientFilterState, errors: &PredictionErrors, mu_next: &Vector) -> Result<Mat> {
    Ok(Mat::outer(&state.pi_z.mul_vec(&errors.eps_z)?, mu_next).scale(-1.0))
}

/// Gradient-descent inference of μ_{t+1}, returning the per-iteration loss
/// trace alongside the final iterate. Starts at the model prediction
/// Âμ_prev + B̂u, so a zero-innovation observation is a fixed point.
pub fn infer_trace(
    state: &GradientFilterState,
    mu_prev: &Vector,
    u: &Vector,
    y: &Vector,
    cfg: &InferenceConfig,
) -> Result<(Vector, Vec<f64>)> {
    cfg.validate()?;
    let eta = cfg.effective_eta(state.curvature_lambda_max()?);
    let mut mu = state.a_hat.mul_vec(mu_prev)?.add(&state.b_hat.mul_vec(u)?)?;
    let mut losses = Vec::with_capacity(cfg.n_steps + 1);
    losses.push(loss(state, &mu, mu_prev, u, y)?);
    for step in 0..cfg.n_steps {
        let errors = compute_errors(state, &mu, mu_prev, u, y)?;
        let g = grad_mu(state, &errors)?;
        mu = mu.sub(&g.scale(eta))?;
        if !mu.is_finite() {
            return Err(Error::Divergence { step });
        }
        losses.push(loss(state, &mu, mu_prev, u, y)?);
    }
    Ok((mu, losses))
}

/// Inference only; see `infer_trace`.
pub fn infer(
    state: &GradientFilterState,
    mu_prev: &Vector,
    u: &Vector,
    y: &Vector,
    cfg: &InferenceConfig,
) -> Result<Vector> {
    Ok(infer_trace(state, mu_prev, u, y, cfg)?.0)
}

/// One filter timestep: infer μ, then apply the enabled matrix updates at the
/// converged μ, then advance the stored estimate.
pub fn step(
    state: &mut GradientFilterState,
    u: &Vector,
    y: &Vector,
    cfg: &InferenceConfig,
) -> Result<StepDiagnostics> {
    let mu_prev = state.mu.clone();
    let (mu, losses) = infer_trace(state, &mu_prev, u, y, cfg)?;
    let errors = compute_errors(state, &mu, &mu_prev, u, y)?;

    if cfg.learn_a {
        let g = grad_a(state, &errors, &mu_prev)?;
        state.a_hat = state.a_hat.sub(&g.scale(cfg.lr_a))?;
    }
    if cfg.learn_b {
        let g = grad_b(state, &errors, u)?;
        state.b_hat = state.b_hat.sub(&g.scale(cfg.lr_b))?;
    }
    if cfg.learn_c {
        let g = grad_c(state, &errors, &mu)?;
        state.c_hat = state.c_hat.sub(&g.scale(cfg.lr_c))?;
    }
    if !state.a_hat.is_finite() || !state.b_hat.is_finite() || !state.c_hat.is_finite() {
        return Err(Error::NonFinite { op: "step: weight update" });
    }

    state.mu = mu.clone();
    Ok(StepDiagnostics {
        mu,
        loss_before: losses[0],
        loss_after: *losses.last().unwrap(),
        errors,
    })
}
