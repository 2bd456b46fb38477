//! Multi-agent learning dynamics as coupled stochastic discrete-time
//! dynamical systems: simulate independent learners in canonical games,
//! record their parameter trajectories, and quantify stability via
//! stationary distributions, Lyapunov exponents, recurrence structure,
//! and correlation dimension.
//!
//! Modules
//! - [`game_env`]: the environment systems (2x2 matrix games, gridworld).
//! - [`learners`]: tabular Q-learning, REINFORCE, and independent DQN.
//! - [`coupled_sim`]: the coupled training loop and trajectory traces.
//! - [`replicator`]: closed-form replicator dynamics for comparison.
//! - [`diagnostics`]: the estimator suite and ensemble reports.
//! - [`sweep`]: hyperparameter sensitivity grids.
//! - [`cli_io`]: configs, persistence formats, plots, and the CLI.

pub mod cli_io;
pub mod coupled_sim;
pub mod diagnostics;
pub mod error;
pub mod game_env;
pub mod learners;
pub mod matrix;
pub mod replicator;
pub mod rng;
pub mod sweep;

pub use coupled_sim::{
    post_burn_samples, project_trace, run_ensemble, run_training, EnsembleOutput, ProjectionMode,
    SimConfig, TrajectoryTrace,
};
pub use diagnostics::{
    correlation_dimension, covariance_frobenius, delay_embed, diagnose, max_lyapunov,
    recurrence_matrix, stationary_distribution, DiagnosticsReport, DiagnosticsSettings,
};
pub use error::{Error, Result};
pub use game_env::{make_matrix_game, Game, GridworldGame, MatrixGame, StateId};
pub use learners::{boltzmann_probs, Learner, LearnerSpec};
pub use matrix::Matrix;
pub use replicator::{integrate_rk4, replicator_rhs, vector_field, ReplicatorState};
pub use sweep::{emit_sensitivity_curves, run_sweep, SweepConfig, SweepResult};
