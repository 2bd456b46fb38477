//! The coupled learner-environment simulation loop: runs two independent
//! learners against a shared game and records their joint parameter
//! trajectory, the raw material for every diagnostic.
//!
//! One update index h advances with every environment step. Matrix-game
//! transitions are stored as continuing (the repeated game bootstraps
//! across plays); the environment's terminal flag marks episode
//! boundaries for the policy-gradient learner and environment resets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_env::{step, Game};
use crate::learners::{AgentLayout, Learner, LearnerSpec, Transition};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, RngStreams};

/// Parameter growth beyond this magnitude aborts the run: distance-based
/// diagnostics are meaningless past overflow.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// What gets written to the trace each recorded update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    #[default]
    RawParams,
    /// P(action 0 | state 0); Boltzmann tabular/IDQN or policy logits in a
    /// stateless game.
    ActionProb,
    /// Q(state 0, action 0) (the logit for policy-gradient agents).
    QOfAction0,
}

/// Resolved simulation parameters for one ensemble.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub game: Game,
    pub agents: Vec<LearnerSpec>,
    pub n_steps: u64,
    pub n_burn: u64,
    pub n_runs: usize,
    pub seed: u64,
    pub record_stride: u64,
    pub projection_mode: ProjectionMode,
    /// Hash of the on-disk config that produced this run (empty for
    /// ad-hoc library use); carried into every trace.
    pub config_hash: String,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents.len() != 2 {
            return Err(Error::config("agents", "exactly two agents are required"));
        }
        if self.n_steps == 0 {
            return Err(Error::config("n_steps", "must be at least 1"));
        }
        if self.n_burn >= self.n_steps {
            return Err(Error::config("n_burn", "must be smaller than n_steps"));
        }
        if self.n_runs == 0 {
            return Err(Error::config("n_runs", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        if let Game::Gridworld(g) = &self.game {
            g.validate()?;
        }
        for (i, spec) in self.agents.iter().enumerate() {
            spec.validate(&format!("agents[{i}]"))?;
        }
        Ok(())
    }
}

/// Recorded trajectory of one run.
#[derive(Debug, Clone)]
pub struct TrajectoryTrace {
    pub run_index: usize,
    pub derived_seed: u64,
    /// Update index h of each recorded row.
    pub steps: Vec<u64>,
    /// One matrix per agent (rows aligned with `steps`).
    pub per_agent: Vec<Matrix>,
    /// Column-concatenation of the per-agent matrices.
    pub joint: Matrix,
    /// Per-agent environment reward at each recorded step (not persisted
    /// in the CSV format; None for traces loaded from disk).
    pub rewards: Option<Matrix>,
    pub projection_mode: ProjectionMode,
    pub layouts: Vec<AgentLayout>,
    pub n_states: usize,
    pub config_hash: String,
}

impl TrajectoryTrace {
    /// Joint rows with h > n_burn as an owned matrix.
    pub fn post_burn_joint(&self, n_burn: u64) -> Matrix {
        let mut out = Matrix::with_capacity(self.joint.rows(), self.joint.cols());
        for (i, &h) in self.steps.iter().enumerate() {
            if h > n_burn {
                out.push_row(self.joint.row(i)).expect("same width");
            }
        }
        out
    }
}

/// Per-run divergence outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub run_index: usize,
    pub update_index: u64,
    pub detail: String,
}

/// All runs of one configuration; diverged members are reported, not fatal.
#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub traces: Vec<TrajectoryTrace>,
    pub diverged: Vec<DivergenceReport>,
    pub n_runs: usize,
}

fn projected_width(layout: &AgentLayout, mode: ProjectionMode) -> usize {
    match mode {
        ProjectionMode::RawParams => layout.flat_len(),
        ProjectionMode::ActionProb | ProjectionMode::QOfAction0 => 1,
    }
}

fn project_row(layout: &AgentLayout, flat: &[f64], mode: ProjectionMode, out: &mut Vec<f64>) -> Result<()> {
    match mode {
        ProjectionMode::RawParams => out.extend_from_slice(flat),
        ProjectionMode::ActionProb => out.push(layout.action0_probability(flat)?),
        ProjectionMode::QOfAction0 => out.push(layout.state0_values(flat)?[0]),
    }
    Ok(())
}

fn validate_projection(mode: ProjectionMode, layouts: &[AgentLayout], n_states: usize) -> Result<()> {
    if mode == ProjectionMode::RawParams {
        return Ok(());
    }
    if mode == ProjectionMode::ActionProb {
        if n_states != 1 {
            return Err(Error::config(
                "projection_mode",
                "action_prob requires a stateless (single-state) game",
            ));
        }
        for (i, layout) in layouts.iter().enumerate() {
            let ok = match layout {
                AgentLayout::Logits { .. } => true,
                AgentLayout::Tabular { temperature, .. }
                | AgentLayout::Idqn { temperature, .. } => temperature.is_some(),
            };
            if !ok {
                return Err(Error::config(
                    format!("agents[{i}]"),
                    "action_prob requires Boltzmann exploration or policy logits",
                ));
            }
        }
    }
    Ok(())
}

/// Simulate one run of the coupled system.
///
/// The derived seed is a hash of (base seed, run_index), making ensemble
/// members independent but individually reproducible.
pub fn run_training(config: &SimConfig, run_index: usize) -> Result<TrajectoryTrace> {
    config.validate()?;
    let game = &config.game;
    let derived_seed = derive_seed(config.seed, &[run_index as u64]);
    let mut streams = RngStreams::new(derived_seed);

    let mut learners: Vec<Learner> = Vec::with_capacity(2);
    for (i, spec) in config.agents.iter().enumerate() {
        learners.push(Learner::build(
            spec,
            &format!("agents[{i}]"),
            game,
            config.n_steps,
            &mut streams.init,
        )?);
    }
    let layouts: Vec<AgentLayout> = learners.iter().map(|l| l.layout()).collect();
    validate_projection(config.projection_mode, &layouts, game.n_states())?;

    let n_recorded = (config.n_steps / config.record_stride) as usize;
    let mode = config.projection_mode;
    let mut per_agent: Vec<Matrix> = layouts
        .iter()
        .map(|l| Matrix::with_capacity(n_recorded, projected_width(l, mode)))
        .collect();
    let mut rewards = Matrix::with_capacity(n_recorded, 2);
    let mut steps = Vec::with_capacity(n_recorded);

    let continuing_matrix_play = matches!(game, Game::Matrix(_));
    let mut state = game.initial_state();
    let mut episode_steps: u64 = 0;
    let mut flat_buf: Vec<f64> = Vec::new();
    let mut row_buf: Vec<f64> = Vec::new();

    for h in 1..=config.n_steps {
        let actions = [
            learners[0].select_action(game, state, h, &mut streams.action)?,
            learners[1].select_action(game, state, h, &mut streams.action)?,
        ];
        let (s_next, step_rewards, env_terminal) = step(game, state, actions, &mut streams.env_noise)?;
        episode_steps += 1;
        let truncated = game
            .max_episode_steps()
            .is_some_and(|cap| episode_steps >= cap);
        // Matrix games flag terminal for episode bookkeeping only; the
        // repeated game is a continuing task for value bootstrapping.
        let value_terminal = env_terminal && !continuing_matrix_play;
        let episode_done = env_terminal || truncated;

        for (i, learner) in learners.iter_mut().enumerate() {
            let transition = Transition {
                s: state,
                a: actions[i],
                r: step_rewards[i],
                s_next,
                terminal: value_terminal,
            };
            learner.on_transition(game, transition, episode_done, h, &mut streams)?;
        }

        if h % config.record_stride == 0 {
            for (i, learner) in learners.iter().enumerate() {
                flat_buf.clear();
                learner.flatten_into(&mut flat_buf);
                if let Some(bad) = flat_buf.iter().find(|v| !v.is_finite() || v.abs() > DIVERGENCE_GUARD)
                {
                    return Err(Error::Diverged {
                        run_index,
                        update_index: h,
                        detail: format!("agent {i} parameter reached {bad}"),
                    });
                }
                row_buf.clear();
                project_row(&layouts[i], &flat_buf, mode, &mut row_buf)?;
                per_agent[i].push_row(&row_buf)?;
            }
            rewards.push_row(&step_rewards)?;
            steps.push(h);
        }

        if episode_done {
            state = game.initial_state();
            episode_steps = 0;
        } else {
            state = s_next;
        }
    }

    let joint = Matrix::hcat(&per_agent.iter().collect::<Vec<_>>())?;
    Ok(TrajectoryTrace {
        run_index,
        derived_seed,
        steps,
        per_agent,
        joint,
        rewards: Some(rewards),
        projection_mode: mode,
        layouts,
        n_states: game.n_states(),
        config_hash: config.config_hash.clone(),
    })
}

/// Run the whole ensemble; members execute independently (and possibly
/// concurrently) and divergence reports are collected without halting
/// the rest.
pub fn run_ensemble(config: &SimConfig) -> Result<EnsembleOutput> {
    config.validate()?;
    let results: Vec<Result<TrajectoryTrace>> = (0..config.n_runs)
        .into_par_iter()
        .map(|run_index| run_training(config, run_index))
        .collect();
    let mut traces = Vec::new();
    let mut diverged = Vec::new();
    for (run_index, result) in results.into_iter().enumerate() {
        match result {
            Ok(trace) => traces.push(trace),
            Err(Error::Diverged {
                run_index: ri,
                update_index,
                detail,
            }) => diverged.push(DivergenceReport {
                run_index: ri,
                update_index,
                detail,
            }),
            Err(other) => return Err(other),
        }
        let _ = run_index;
    }
    Ok(EnsembleOutput {
        traces,
        diverged,
        n_runs: config.n_runs,
    })
}

/// Union of all post-burn-in joint rows across runs, as one sample matrix
/// for density and covariance estimation.
pub fn post_burn_samples(traces: &[TrajectoryTrace], n_burn: u64) -> Result<Matrix> {
    let per_trace: Vec<Matrix> = traces.iter().map(|t| t.post_burn_joint(n_burn)).collect();
    let total: usize = per_trace.iter().map(|m| m.rows()).sum();
    if total == 0 {
        return Err(Error::config(
            "n_burn",
            "no recorded samples remain after burn-in",
        ));
    }
    Matrix::vcat(&per_trace.iter().collect::<Vec<_>>())
}

/// Re-project a raw-parameter trace into a scalar-per-agent view.
pub fn project_trace(trace: &TrajectoryTrace, mode: ProjectionMode) -> Result<TrajectoryTrace> {
    if mode == trace.projection_mode {
        return Ok(trace.clone());
    }
    if trace.projection_mode != ProjectionMode::RawParams {
        return Err(Error::config(
            "projection_mode",
            format!(
                "trace already projected as {:?}; only raw_params traces can be re-projected",
                trace.projection_mode
            ),
        ));
    }
    validate_projection(mode, &trace.layouts, trace.n_states)?;
    let mut per_agent = Vec::with_capacity(trace.per_agent.len());
    for (layout, raw) in trace.layouts.iter().zip(trace.per_agent.iter()) {
        let mut m = Matrix::with_capacity(raw.rows(), projected_width(layout, mode));
        let mut row_buf = Vec::new();
        for i in 0..raw.rows() {
            row_buf.clear();
            project_row(layout, raw.row(i), mode, &mut row_buf)?;
            m.push_row(&row_buf)?;
        }
        per_agent.push(m);
    }
    let joint = Matrix::hcat(&per_agent.iter().collect::<Vec<_>>())?;
    Ok(TrajectoryTrace {
        run_index: trace.run_index,
        derived_seed: trace.derived_seed,
        steps: trace.steps.clone(),
        per_agent,
        joint,
        rewards: trace.rewards.clone(),
        projection_mode: mode,
        layouts: trace.layouts.clone(),
        n_states: trace.n_states,
        config_hash: trace.config_hash.clone(),
    })
}
