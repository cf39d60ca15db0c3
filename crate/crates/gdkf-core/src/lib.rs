//! State estimation for linear-Gaussian models: an exact Kalman filter, a
//! gradient-descent MAP filter driven by precision-weighted prediction
//! errors, Hebbian online learning of the model matrices, and an experiment
//! harness on a constant-acceleration tracking task.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod gradient;
pub mod linalg;
pub mod model;
pub mod selftest;
pub mod textio;

pub use analytic::{map_solve, BeliefState, FilterStep};
pub use error::{Error, Result};
pub use gradient::{GradientFilterState, InferenceConfig, PredictionErrors, StepDiagnostics};
pub use linalg::{finite_diff_grad, is_psd, solve_spd, Mat, Vector};
pub use model::{CMode, LinearGaussianModel, Trajectory};
pub use experiment::{ExperimentConfig, ExperimentResult, PiXMode, Scenario};
