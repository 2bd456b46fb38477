//! Agent update rules: tabular Q-learning, REINFORCE policy gradient, and
//! independent DQN, each behind a common `Learner` interface driven by the
//! simulation loop.
//!
//! Every learner is deterministic given its `RngStreams`, so two runs with
//! the same config and seed produce bitwise-identical parameter traces.

mod mlp;
mod policy;
mod qtable;
mod replay;

pub use mlp::{dqn_update, mlp_forward, sync_target, DenseLayer, DqnBatch, Mlp};
pub use policy::{reinforce_update, BaselineMode, PolicyLogits};
pub use qtable::{q_update, QTable};
pub use replay::{ReplayBuffer, Transition};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_env::{encode_state, encoding_dim, Game, StateEncoding, StateId};
use crate::rng::RngStreams;

/// Exploration configuration as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExplorationSpec {
    Boltzmann {
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
    EpsilonGreedy {
        #[serde(default = "default_eps_start")]
        eps_start: f64,
        #[serde(default)]
        eps_end: f64,
        /// Exponential decay rate per update step; `null` resolves to 5/H.
        #[serde(default)]
        decay_rate: Option<f64>,
    },
}

fn default_temperature() -> f64 {
    1.0
}
fn default_eps_start() -> f64 {
    0.9
}

impl Default for ExplorationSpec {
    fn default() -> Self {
        ExplorationSpec::Boltzmann {
            temperature: default_temperature(),
        }
    }
}

/// Resolved exploration schedule (decay rate filled in).
#[derive(Debug, Clone, PartialEq)]
pub enum Exploration {
    Boltzmann { temperature: f64 },
    EpsilonGreedy { eps_start: f64, eps_end: f64, decay_rate: f64 },
}

impl Exploration {
    pub fn resolve(spec: &ExplorationSpec, key: &str, n_steps: u64) -> Result<Self> {
        match *spec {
            ExplorationSpec::Boltzmann { temperature } => {
                if !(temperature > 0.0) || !temperature.is_finite() {
                    return Err(Error::config(
                        format!("{key}.temperature"),
                        "must be a positive finite real",
                    ));
                }
                Ok(Exploration::Boltzmann { temperature })
            }
            ExplorationSpec::EpsilonGreedy {
                eps_start,
                eps_end,
                decay_rate,
            } => {
                if !(0.0..=1.0).contains(&eps_start) {
                    return Err(Error::config(
                        format!("{key}.eps_start"),
                        "must lie in [0,1]",
                    ));
                }
                if !(0.0..=eps_start).contains(&eps_end) {
                    return Err(Error::config(
                        format!("{key}.eps_end"),
                        "must lie in [0, eps_start]",
                    ));
                }
                let decay_rate = match decay_rate {
                    Some(r) if r > 0.0 && r.is_finite() => r,
                    Some(_) => {
                        return Err(Error::config(
                            format!("{key}.decay_rate"),
                            "must be a positive finite real",
                        ))
                    }
                    None => 5.0 / n_steps.max(1) as f64,
                };
                Ok(Exploration::EpsilonGreedy {
                    eps_start,
                    eps_end,
                    decay_rate,
                })
            }
        }
    }

    /// eps(h) = eps_end + (eps_start - eps_end) * exp(-decay_rate * h).
    pub fn epsilon(&self, h: u64) -> f64 {
        match *self {
            Exploration::Boltzmann { .. } => 0.0,
            Exploration::EpsilonGreedy {
                eps_start,
                eps_end,
                decay_rate,
            } => eps_end + (eps_start - eps_end) * (-decay_rate * h as f64).exp(),
        }
    }

    pub fn temperature(&self) -> Option<f64> {
        match *self {
            Exploration::Boltzmann { temperature } => Some(temperature),
            Exploration::EpsilonGreedy { .. } => None,
        }
    }
}

/// Per-agent learner configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    TabularQ {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default)]
        exploration: ExplorationSpec,
    },
    Reinforce {
        #[serde(default = "default_pg_lr")]
        learning_rate: f64,
        #[serde(default)]
        baseline: BaselineMode,
        #[serde(default = "default_pg_discount")]
        discount: f64,
    },
    Idqn {
        #[serde(default = "default_dqn_lr")]
        learning_rate: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_buffer_capacity")]
        buffer_capacity: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_target_sync")]
        target_sync: u64,
        /// Learn from sampled minibatches; `false` updates on the latest
        /// transition only.
        #[serde(default = "default_true")]
        use_replay: bool,
        /// Bootstrap from a periodically synced copy; `false` bootstraps
        /// from the online network.
        #[serde(default = "default_true")]
        use_target: bool,
        #[serde(default)]
        encoding: Option<StateEncoding>,
        #[serde(default)]
        exploration: ExplorationSpec,
    },
}

fn default_alpha() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    0.9
}
fn default_pg_lr() -> f64 {
    0.01
}
fn default_pg_discount() -> f64 {
    1.0
}
fn default_dqn_lr() -> f64 {
    1e-3
}
fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn default_buffer_capacity() -> usize {
    10_000
}
fn default_batch_size() -> usize {
    32
}
fn default_target_sync() -> u64 {
    100
}
fn default_true() -> bool {
    true
}

impl LearnerSpec {
    pub fn validate(&self, key: &str) -> Result<()> {
        match self {
            LearnerSpec::TabularQ { alpha, gamma, .. } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::config(format!("{key}.alpha"), "must lie in [0,1]"));
                }
                if !(0.0..1.0).contains(gamma) {
                    return Err(Error::config(format!("{key}.gamma"), "must lie in [0,1)"));
                }
            }
            LearnerSpec::Reinforce {
                learning_rate,
                discount,
                ..
            } => {
                if !learning_rate.is_finite() || *learning_rate < 0.0 {
                    return Err(Error::config(
                        format!("{key}.learning_rate"),
                        "must be a non-negative finite real",
                    ));
                }
                if !(0.0..=1.0).contains(discount) {
                    return Err(Error::config(format!("{key}.discount"), "must lie in [0,1]"));
                }
            }
            LearnerSpec::Idqn {
                learning_rate,
                gamma,
                hidden,
                buffer_capacity,
                batch_size,
                target_sync,
                ..
            } => {
                if !learning_rate.is_finite() || *learning_rate < 0.0 {
                    return Err(Error::config(
                        format!("{key}.learning_rate"),
                        "must be a non-negative finite real",
                    ));
                }
                if !(0.0..1.0).contains(gamma) {
                    return Err(Error::config(format!("{key}.gamma"), "must lie in [0,1)"));
                }
                if hidden.is_empty() || hidden.contains(&0) {
                    return Err(Error::config(
                        format!("{key}.hidden"),
                        "need at least one hidden layer of positive width",
                    ));
                }
                if *batch_size == 0 || *buffer_capacity < *batch_size {
                    return Err(Error::config(
                        format!("{key}.buffer_capacity"),
                        "must be at least batch_size (both positive)",
                    ));
                }
                if *target_sync == 0 {
                    return Err(Error::config(format!("{key}.target_sync"), "must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Boltzmann (softmax) action probabilities with max-subtraction.
pub fn boltzmann_probs(q_row: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Contract(format!(
            "boltzmann temperature must be positive and finite, got {temperature}"
        )));
    }
    if q_row.is_empty() || q_row.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(
            "boltzmann q-row must be non-empty and finite".to_string(),
        ));
    }
    let m = q_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = q_row.iter().map(|&q| ((q - m) / temperature).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(probs)
}

/// Softmax with unit temperature (policy-gradient convention).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    boltzmann_probs(logits, 1.0).expect("finite logits")
}

/// Lowest-index argmax.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF sample from a probability vector.
pub fn sample_categorical(probs: &[f64], rng: &mut ChaCha12Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Shape metadata needed to interpret a flattened parameter row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentLayout {
    Tabular {
        n_states: usize,
        n_actions: usize,
        temperature: Option<f64>,
    },
    Logits {
        n_states: usize,
        n_actions: usize,
    },
    Idqn {
        /// Layer widths including input and output.
        dims: Vec<usize>,
        temperature: Option<f64>,
    },
}

impl AgentLayout {
    pub fn flat_len(&self) -> usize {
        match self {
            AgentLayout::Tabular {
                n_states, n_actions, ..
            }
            | AgentLayout::Logits { n_states, n_actions } => n_states * n_actions,
            AgentLayout::Idqn { dims, .. } => dims
                .windows(2)
                .map(|w| w[0] * w[1] + w[1])
                .sum(),
        }
    }

    /// Q-values (or logits) at state 0 reconstructed from a flat row.
    pub fn state0_values(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self {
            AgentLayout::Tabular { n_actions, .. } | AgentLayout::Logits { n_actions, .. } => {
                Ok(row[0..*n_actions].to_vec())
            }
            AgentLayout::Idqn { dims, .. } => {
                let net = Mlp::from_flat(dims, row)?;
                let mut input = vec![0.0; dims[0]];
                input[0] = 1.0;
                mlp_forward(&net, &input)
            }
        }
    }

    /// P(action 0 | state 0) for probability-interpretable agents.
    pub fn action0_probability(&self, row: &[f64]) -> Result<f64> {
        let values = self.state0_values(row)?;
        match self {
            AgentLayout::Logits { .. } => Ok(softmax(&values)[0]),
            AgentLayout::Tabular { temperature, .. } | AgentLayout::Idqn { temperature, .. } => {
                let t = temperature.ok_or_else(|| {
                    Error::config(
                        "projection_mode",
                        "action_prob requires Boltzmann exploration",
                    )
                })?;
                Ok(boltzmann_probs(&values, t)?[0])
            }
        }
    }
}

/// A live agent owned by one simulation run.
#[derive(Debug, Clone)]
pub enum Learner {
    Tabular {
        table: QTable,
        exploration: Exploration,
    },
    Reinforce {
        policy: PolicyLogits,
        episode: Vec<(StateId, usize, f64)>,
    },
    Idqn(IdqnAgent),
}

#[derive(Debug, Clone)]
pub struct IdqnAgent {
    pub online: Mlp,
    pub target: Mlp,
    pub replay: ReplayBuffer,
    pub learning_rate: f64,
    pub gamma: f64,
    pub target_sync: u64,
    pub use_replay: bool,
    pub use_target: bool,
    pub encoding: StateEncoding,
    pub exploration: Exploration,
    enc_dim: usize,
}

impl Learner {
    /// Instantiate a learner for `game`, drawing any initial parameters
    /// from the init stream.
    pub fn build(
        spec: &LearnerSpec,
        key: &str,
        game: &Game,
        n_steps: u64,
        init_rng: &mut ChaCha12Rng,
    ) -> Result<Learner> {
        spec.validate(key)?;
        let n_states = game.n_states();
        let n_actions = game.n_actions();
        match spec {
            LearnerSpec::TabularQ {
                alpha,
                gamma,
                exploration,
            } => Ok(Learner::Tabular {
                table: QTable::zeros(n_states, n_actions, *alpha, *gamma),
                exploration: Exploration::resolve(exploration, &format!("{key}.exploration"), n_steps)?,
            }),
            LearnerSpec::Reinforce {
                learning_rate,
                baseline,
                discount,
            } => Ok(Learner::Reinforce {
                policy: PolicyLogits::zeros(n_states, n_actions, *learning_rate, *baseline, *discount),
                episode: Vec::new(),
            }),
            LearnerSpec::Idqn {
                learning_rate,
                gamma,
                hidden,
                buffer_capacity,
                batch_size,
                target_sync,
                use_replay,
                use_target,
                encoding,
                exploration,
            } => {
                let encoding = encoding.unwrap_or(match game {
                    Game::Matrix(_) => StateEncoding::OneHot,
                    Game::Gridworld(_) => StateEncoding::Coords,
                });
                let enc_dim = encoding_dim(game, encoding)
                    .map_err(|_| Error::config(format!("{key}.encoding"), "coords encoding requires the gridworld game"))?;
                let mut dims = Vec::with_capacity(hidden.len() + 2);
                dims.push(enc_dim);
                dims.extend_from_slice(hidden);
                dims.push(n_actions);
                let online = Mlp::init_uniform(&dims, init_rng);
                let target = online.clone();
                Ok(Learner::Idqn(IdqnAgent {
                    online,
                    target,
                    replay: ReplayBuffer::new(*buffer_capacity, *batch_size),
                    learning_rate: *learning_rate,
                    gamma: *gamma,
                    target_sync: *target_sync,
                    use_replay: *use_replay,
                    use_target: *use_target,
                    encoding,
                    exploration: Exploration::resolve(exploration, &format!("{key}.exploration"), n_steps)?,
                    enc_dim,
                }))
            }
        }
    }

    fn q_values(&self, game: &Game, state: StateId) -> Result<Vec<f64>> {
        match self {
            Learner::Tabular { table, .. } => Ok(table.row(state).to_vec()),
            Learner::Reinforce { policy, .. } => Ok(policy.row(state).to_vec()),
            Learner::Idqn(agent) => {
                let mut input = vec![0.0; agent.enc_dim];
                encode_state(game, agent.encoding, state, &mut input);
                mlp_forward(&agent.online, &input)
            }
        }
    }

    /// Draw an action for `state` at update index `h` from the action stream.
    pub fn select_action(
        &self,
        game: &Game,
        state: StateId,
        h: u64,
        rng: &mut ChaCha12Rng,
    ) -> Result<usize> {
        let values = self.q_values(game, state)?;
        match self {
            Learner::Reinforce { .. } => Ok(sample_categorical(&softmax(&values), rng)),
            Learner::Tabular { exploration, .. } => sample_explored(&values, exploration, h, rng),
            Learner::Idqn(agent) => sample_explored(&values, &agent.exploration, h, rng),
        }
    }

    /// Feed one environment transition.
    ///
    /// `value_terminal` controls bootstrap truncation; `episode_done`
    /// marks the episode boundary used by the policy-gradient learner.
    pub fn on_transition(
        &mut self,
        game: &Game,
        transition: Transition,
        episode_done: bool,
        h: u64,
        streams: &mut RngStreams,
    ) -> Result<()> {
        match self {
            Learner::Tabular { table, .. } => {
                q_update(table, &transition);
                Ok(())
            }
            Learner::Reinforce { policy, episode } => {
                episode.push((transition.s, transition.a, transition.r));
                if episode_done {
                    reinforce_update(policy, episode);
                    episode.clear();
                }
                Ok(())
            }
            Learner::Idqn(agent) => agent.on_transition(game, transition, h, &mut streams.minibatch),
        }
    }

    pub fn flat_len(&self) -> usize {
        match self {
            Learner::Tabular { table, .. } => table.values().len(),
            Learner::Reinforce { policy, .. } => policy.logits().len(),
            Learner::Idqn(agent) => agent.online.flat_len(),
        }
    }

    /// Order-stable flattening of the learnable parameters.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            Learner::Tabular { table, .. } => out.extend_from_slice(table.values()),
            Learner::Reinforce { policy, .. } => out.extend_from_slice(policy.logits()),
            Learner::Idqn(agent) => agent.online.flatten_into(out),
        }
    }

    pub fn layout(&self) -> AgentLayout {
        match self {
            Learner::Tabular { table, exploration } => AgentLayout::Tabular {
                n_states: table.n_states(),
                n_actions: table.n_actions(),
                temperature: exploration.temperature(),
            },
            Learner::Reinforce { policy, .. } => AgentLayout::Logits {
                n_states: policy.n_states(),
                n_actions: policy.n_actions(),
            },
            Learner::Idqn(agent) => AgentLayout::Idqn {
                dims: agent.online.dims(),
                temperature: agent.exploration.temperature(),
            },
        }
    }
}

fn sample_explored(
    values: &[f64],
    exploration: &Exploration,
    h: u64,
    rng: &mut ChaCha12Rng,
) -> Result<usize> {
    match exploration {
        Exploration::Boltzmann { temperature } => {
            Ok(sample_categorical(&boltzmann_probs(values, *temperature)?, rng))
        }
        Exploration::EpsilonGreedy { .. } => {
            let eps = exploration.epsilon(h);
            let u: f64 = rng.random();
            if u < eps {
                Ok(rng.random_range(0..values.len()))
            } else {
                Ok(argmax(values))
            }
        }
    }
}

impl IdqnAgent {
    fn on_transition(
        &mut self,
        game: &Game,
        transition: Transition,
        h: u64,
        minibatch_rng: &mut ChaCha12Rng,
    ) -> Result<()> {
        self.replay.push(transition);
        let batch: Vec<Transition> = if self.use_replay {
            if !self.replay.is_ready() {
                sync_target(&self.online, &mut self.target, self.target_sync, h);
                return Ok(());
            }
            self.replay
                .sample_indices(minibatch_rng)?
                .into_iter()
                .map(|i| self.replay.get(i))
                .collect()
        } else {
            vec![transition]
        };

        let b = batch.len();
        let mut states = vec![0.0; b * self.enc_dim];
        let mut next_states = vec![0.0; b * self.enc_dim];
        let mut actions = Vec::with_capacity(b);
        let mut rewards = Vec::with_capacity(b);
        let mut terminals = Vec::with_capacity(b);
        for (i, t) in batch.iter().enumerate() {
            encode_state(game, self.encoding, t.s, &mut states[i * self.enc_dim..(i + 1) * self.enc_dim]);
            encode_state(
                game,
                self.encoding,
                t.s_next,
                &mut next_states[i * self.enc_dim..(i + 1) * self.enc_dim],
            );
            actions.push(t.a);
            rewards.push(t.r);
            terminals.push(t.terminal);
        }
        let batch_view = DqnBatch {
            states: &states,
            next_states: &next_states,
            enc_dim: self.enc_dim,
            actions: &actions,
            rewards: &rewards,
            terminals: &terminals,
        };
        if self.use_target {
            dqn_update(&mut self.online, &self.target, &batch_view, self.learning_rate, self.gamma)?;
        } else {
            // Targets come from a pre-update snapshot of the online net.
            let frozen = self.online.clone();
            dqn_update(&mut self.online, &frozen, &batch_view, self.learning_rate, self.gamma)?;
        }
        sync_target(&self.online, &mut self.target, self.target_sync, h);
        Ok(())
    }
}
