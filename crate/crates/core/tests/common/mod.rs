//! Shared fixtures and config builders for the integration suites.
#![allow(dead_code)]

use marl_dyn::cli_io::config::{GameSpec, RunConfig};
use marl_dyn::coupled_sim::ProjectionMode;
use marl_dyn::learners::{ExplorationSpec, LearnerSpec};
use marl_dyn::matrix::Matrix;

/// Logistic map at full chaos (r = 4).
pub fn logistic_series(n: usize, x0: f64) -> Vec<f64> {
    let mut xs = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        xs.push(x);
        x = 4.0 * x * (1.0 - x);
    }
    xs
}

/// Unit-circle orbit sampled by an irrational rotation.
pub fn circle_points(n: usize) -> Matrix {
    let golden = 0.618_033_988_749_894_9;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let phi = 2.0 * std::f64::consts::PI * ((i as f64 * golden) % 1.0);
            vec![phi.cos(), phi.sin()]
        })
        .collect();
    Matrix::from_rows(&rows).expect("fixed width")
}

pub fn tabular_boltzmann(alpha: f64, temperature: f64, gamma: f64) -> LearnerSpec {
    LearnerSpec::TabularQ {
        alpha,
        gamma,
        exploration: ExplorationSpec::Boltzmann { temperature },
    }
}

pub fn idqn_eps_greedy(
    learning_rate: f64,
    gamma: f64,
    eps_end: f64,
    decay_rate: Option<f64>,
) -> LearnerSpec {
    LearnerSpec::Idqn {
        learning_rate,
        gamma,
        hidden: vec![16, 16],
        buffer_capacity: 10_000,
        batch_size: 32,
        target_sync: 100,
        use_replay: true,
        use_target: true,
        encoding: None,
        exploration: ExplorationSpec::EpsilonGreedy {
            eps_start: 0.9,
            eps_end,
            decay_rate,
        },
    }
}

/// Ensemble configuration used for the cross-game attractor comparison:
/// independent DQN with decaying epsilon-greedy exploration.
pub fn pattern_config(game: &str) -> RunConfig {
    RunConfig {
        schema_version: 1,
        game: GameSpec::named(game),
        agents: vec![
            idqn_eps_greedy(1e-3, 0.9, 0.1, None),
            idqn_eps_greedy(1e-3, 0.9, 0.1, None),
        ],
        n_steps: 40_000,
        n_burn: 10_000,
        n_runs: 16,
        seed: 20240801,
        record_stride: 15,
        projection_mode: ProjectionMode::RawParams,
        diagnostics: Default::default(),
    }
}

/// Ensemble configuration for the stationary-density comparison:
/// tabular Boltzmann agents recorded as action probabilities.
pub fn boltzmann_density_config(game: &str) -> RunConfig {
    RunConfig {
        schema_version: 1,
        game: GameSpec::named(game),
        agents: vec![
            tabular_boltzmann(1e-3, 0.25, 0.9),
            tabular_boltzmann(1e-3, 0.25, 0.9),
        ],
        n_steps: 50_000,
        n_burn: 10_000,
        n_runs: 16,
        seed: 424242,
        record_stride: 10,
        projection_mode: ProjectionMode::ActionProb,
        diagnostics: Default::default(),
    }
}
