//! Softmax policy parameterization and the REINFORCE update.

use serde::{Deserialize, Serialize};

use crate::game_env::StateId;

use super::softmax;

/// Baseline subtracted from returns in the policy-gradient update.
///
/// `mean_return` tracks the running average of completed-episode returns,
/// which plays the role of the average payoff in the fitness comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    None,
    #[default]
    MeanReturn,
}

/// |S| x |A| policy logits; the policy at each state is softmax(logits).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLogits {
    logits: Vec<f64>,
    n_states: usize,
    n_actions: usize,
    pub learning_rate: f64,
    pub baseline: BaselineMode,
    pub discount: f64,
    baseline_mean: f64,
    baseline_count: u64,
}

impl PolicyLogits {
    pub fn zeros(
        n_states: usize,
        n_actions: usize,
        learning_rate: f64,
        baseline: BaselineMode,
        discount: f64,
    ) -> Self {
        PolicyLogits {
            logits: vec![0.0; n_states * n_actions],
            n_states,
            n_actions,
            learning_rate,
            baseline,
            discount,
            baseline_mean: 0.0,
            baseline_count: 0,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        &self.logits[state.0 * self.n_actions..(state.0 + 1) * self.n_actions]
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn probs(&self, state: StateId) -> Vec<f64> {
        softmax(self.row(state))
    }

    /// Current baseline value (0 until the first episode completes).
    pub fn baseline_value(&self) -> f64 {
        match self.baseline {
            BaselineMode::None => 0.0,
            BaselineMode::MeanReturn => {
                if self.baseline_count == 0 {
                    0.0
                } else {
                    self.baseline_mean
                }
            }
        }
    }

    fn record_return(&mut self, episode_return: f64) {
        self.baseline_count += 1;
        self.baseline_mean += (episode_return - self.baseline_mean) / self.baseline_count as f64;
    }
}

/// REINFORCE episode update.
///
/// The gradient is evaluated at the pre-update policy for every step, then
/// applied once: logits[s] += lr * (G_t - b) * (onehot(a) - softmax(logits[s])).
/// The baseline b is the running mean of previous episode returns (or 0).
pub fn reinforce_update(policy: &mut PolicyLogits, episode: &[(StateId, usize, f64)]) {
    if episode.is_empty() {
        return;
    }
    // Discounted return from each step.
    let mut returns = vec![0.0; episode.len()];
    let mut acc = 0.0;
    for (i, &(_, _, r)) in episode.iter().enumerate().rev() {
        acc = r + policy.discount * acc;
        returns[i] = acc;
    }
    let baseline = policy.baseline_value();

    let mut grad = vec![0.0; policy.logits.len()];
    for (&(s, a, _), &g) in episode.iter().zip(returns.iter()) {
        let advantage = g - baseline;
        let probs = policy.probs(s);
        let base = s.0 * policy.n_actions;
        for (j, &p) in probs.iter().enumerate() {
            let indicator = if j == a { 1.0 } else { 0.0 };
            grad[base + j] += advantage * (indicator - p);
        }
    }
    let lr = policy.learning_rate;
    for (l, g) in policy.logits.iter_mut().zip(grad.iter()) {
        *l += lr * g;
    }
    policy.record_return(returns[0]);
}
