//! Tabular action-value store and the Watkins update rule.

use crate::game_env::StateId;

use super::replay::Transition;

/// |S| x |A| action-value table with its learning hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    n_states: usize,
    n_actions: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Self {
        QTable {
            values: vec![0.0; n_states * n_actions],
            n_states,
            n_actions,
            alpha,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        &self.values[state.0 * self.n_actions..(state.0 + 1) * self.n_actions]
    }

    pub fn get(&self, state: StateId, action: usize) -> f64 {
        self.values[state.0 * self.n_actions + action]
    }

    pub fn set(&mut self, state: StateId, action: usize, v: f64) {
        self.values[state.0 * self.n_actions + action] = v;
    }

    /// Row-major flattened view (the trace coordinate system).
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One-step Q-learning update:
/// Q(s,a) += alpha * (r + gamma * max_b Q(s',b) * [not terminal] - Q(s,a)).
pub fn q_update(table: &mut QTable, t: &Transition) {
    let bootstrap = if t.terminal {
        0.0
    } else {
        table
            .row(t.s_next)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let q = table.get(t.s, t.a);
    let td = t.r + table.gamma * bootstrap - q;
    table.set(t.s, t.a, q + table.alpha * td);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(r: f64, terminal: bool) -> Transition {
        Transition {
            s: StateId(0),
            a: 0,
            r,
            s_next: StateId(0),
            terminal,
        }
    }

    #[test]
    fn terminal_update_matches_formula() {
        let mut t = QTable::zeros(1, 2, 0.1, 0.9);
        q_update(&mut t, &transition(1.0, true));
        assert!((t.get(StateId(0), 0) - 0.1).abs() < 1e-15);
        assert_eq!(t.get(StateId(0), 1), 0.0);
    }

    #[test]
    fn bootstrap_uses_max_next_value() {
        let mut t = QTable::zeros(2, 2, 0.5, 0.9);
        t.set(StateId(1), 0, 2.0);
        t.set(StateId(1), 1, 4.0);
        let tr = Transition {
            s: StateId(0),
            a: 1,
            r: 1.0,
            s_next: StateId(1),
            terminal: false,
        };
        q_update(&mut t, &tr);
        // target = 1 + 0.9*4 = 4.6; update = 0.5*4.6 = 2.3
        assert!((t.get(StateId(0), 1) - 2.3).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_leaves_table_unchanged() {
        let mut t = QTable::zeros(1, 2, 0.0, 0.9);
        t.set(StateId(0), 0, 0.7);
        let before = t.values().to_vec();
        q_update(&mut t, &transition(5.0, false));
        assert_eq!(t.values(), &before[..]);
    }

    #[test]
    fn zero_td_error_is_a_fixed_point() {
        let mut t = QTable::zeros(1, 2, 0.3, 0.5);
        t.set(StateId(0), 0, 2.0);
        t.set(StateId(0), 1, 2.0);
        // r + gamma*max = 1 + 0.5*2 = 2 = Q(s,a)
        let tr = Transition {
            s: StateId(0),
            a: 0,
            r: 1.0,
            s_next: StateId(0),
            terminal: false,
        };
        let before = t.values().to_vec();
        q_update(&mut t, &tr);
        assert_eq!(t.values(), &before[..]);
    }
}
