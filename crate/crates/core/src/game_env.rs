//! Environment dynamical systems: the four canonical 2x2 matrix games and a
//! small cooperative gridworld.
//!
//! Matrix games are stateless one-shot interactions (single state, terminal
//! every step); the repeated-game structure lives in the training loop. The
//! gridworld is a deterministic multi-state coordination task: both agents
//! must stand on distinct goal cells on the same step to earn the joint
//! reward.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an environment state; stateless games use the single state 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateId(pub usize);

/// A two-player, two-action normal-form game.
///
/// `payoffs[i][a0][a1]` is the reward to agent `i` when agent 0 plays `a0`
/// (row player) and agent 1 plays `a1` (column player). Action 0 is the
/// first action listed in the game's table (C, H, S, A respectively).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    pub name: String,
    pub payoffs: [[[f64; 2]; 2]; 2],
    pub zero_sum: bool,
}

impl MatrixGame {
    pub fn custom(name: &str, payoffs: [[[f64; 2]; 2]; 2], zero_sum: bool) -> Result<Self> {
        for agent in &payoffs {
            for row in agent {
                for v in row {
                    if !v.is_finite() {
                        return Err(Error::config("game.payoffs", "entries must be finite"));
                    }
                }
            }
        }
        if zero_sum {
            for a0 in 0..2 {
                for a1 in 0..2 {
                    if payoffs[0][a0][a1] + payoffs[1][a0][a1] != 0.0 {
                        return Err(Error::config(
                            "game.zero_sum",
                            format!("payoffs at ({a0},{a1}) do not sum to zero"),
                        ));
                    }
                }
            }
        }
        Ok(MatrixGame {
            name: name.to_string(),
            payoffs,
            zero_sum,
        })
    }

    pub fn rewards(&self, a0: usize, a1: usize) -> [f64; 2] {
        [self.payoffs[0][a0][a1], self.payoffs[1][a0][a1]]
    }
}

/// Build one of the four canonical benchmark games by name.
pub fn make_matrix_game(name: &str) -> Result<MatrixGame> {
    // Tables are (row payoff, column payoff) with the row player as agent 0.
    let (payoffs, zero_sum): ([[[f64; 2]; 2]; 2], bool) = match name {
        // actions: C, D
        "prisoners_dilemma" => ([[[1.0, 5.0], [0.0, 3.0]], [[1.0, 0.0], [5.0, 3.0]]], false),
        // actions: H, T
        "matching_pennies" => (
            [[[1.0, -1.0], [-1.0, 1.0]], [[-1.0, 1.0], [1.0, -1.0]]],
            true,
        ),
        // actions: S, H
        "stag_hunt" => ([[[4.0, 0.0], [0.0, 3.0]], [[4.0, 0.0], [0.0, 3.0]]], false),
        // actions: A, B
        "chicken" => ([[[-1.0, 4.0], [0.0, 2.0]], [[-1.0, 0.0], [4.0, 2.0]]], false),
        other => {
            return Err(Error::config(
                "game.name",
                format!(
                    "unknown game `{other}`; expected one of prisoners_dilemma, \
                     matching_pennies, stag_hunt, chicken, gridworld, custom"
                ),
            ))
        }
    };
    MatrixGame::custom(name, payoffs, zero_sum)
}

/// Cooperative gridworld parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldGame {
    #[serde(default = "default_grid_dim")]
    pub width: usize,
    #[serde(default = "default_grid_dim")]
    pub height: usize,
    /// (x, y) start cells, one per agent.
    #[serde(default = "default_starts")]
    pub start_positions: [(usize, usize); 2],
    /// Cells that count as goals; both agents must occupy distinct ones.
    #[serde(default = "default_goals")]
    pub goal_cells: Vec<(usize, usize)>,
    #[serde(default = "default_max_episode_steps")]
    pub max_episode_steps: u64,
    #[serde(default = "default_step_penalty")]
    pub step_penalty: f64,
    #[serde(default = "default_joint_goal_reward")]
    pub joint_goal_reward: f64,
}

fn default_grid_dim() -> usize {
    5
}
fn default_starts() -> [(usize, usize); 2] {
    [(0, 0), (4, 4)]
}
fn default_goals() -> Vec<(usize, usize)> {
    vec![(4, 0), (0, 4)]
}
fn default_max_episode_steps() -> u64 {
    50
}
fn default_step_penalty() -> f64 {
    -0.01
}
fn default_joint_goal_reward() -> f64 {
    1.0
}

impl Default for GridworldGame {
    fn default() -> Self {
        GridworldGame {
            width: default_grid_dim(),
            height: default_grid_dim(),
            start_positions: default_starts(),
            goal_cells: default_goals(),
            max_episode_steps: default_max_episode_steps(),
            step_penalty: default_step_penalty(),
            joint_goal_reward: default_joint_goal_reward(),
        }
    }
}

/// Gridworld actions: up, down, left, right, stay.
pub const GRID_ACTIONS: usize = 5;

impl GridworldGame {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("game.gridworld", "grid dimensions must be positive"));
        }
        let in_bounds = |&(x, y): &(usize, usize)| x < self.width && y < self.height;
        if !self.start_positions.iter().all(in_bounds) {
            return Err(Error::config(
                "game.gridworld.start_positions",
                "start positions must lie inside the grid",
            ));
        }
        if self.start_positions[0] == self.start_positions[1] {
            return Err(Error::config(
                "game.gridworld.start_positions",
                "agents may not share a start cell",
            ));
        }
        if self.goal_cells.len() < 2 || !self.goal_cells.iter().all(in_bounds) {
            return Err(Error::config(
                "game.gridworld.goal_cells",
                "need at least two goal cells inside the grid",
            ));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::config(
                "game.gridworld.max_episode_steps",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn n_states(&self) -> usize {
        self.n_cells() * self.n_cells()
    }

    fn cell_index(&self, (x, y): (usize, usize)) -> usize {
        y * self.width + x
    }

    fn cell_coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn state_of(&self, positions: [(usize, usize); 2]) -> StateId {
        StateId(self.cell_index(positions[0]) * self.n_cells() + self.cell_index(positions[1]))
    }

    pub fn positions_of(&self, state: StateId) -> [(usize, usize); 2] {
        let n = self.n_cells();
        [self.cell_coords(state.0 / n), self.cell_coords(state.0 % n)]
    }

    pub fn initial_state(&self) -> StateId {
        self.state_of(self.start_positions)
    }

    fn move_target(&self, (x, y): (usize, usize), action: usize) -> (usize, usize) {
        match action {
            0 => (x, y.saturating_sub(1)),                      // up
            1 => (x, (y + 1).min(self.height - 1)),             // down
            2 => (x.saturating_sub(1), y),                      // left
            3 => ((x + 1).min(self.width - 1), y),              // right
            _ => (x, y),                                        // stay
        }
    }

    fn is_goal(&self, pos: (usize, usize)) -> bool {
        self.goal_cells.contains(&pos)
    }

    /// Deterministic joint transition. Agents that target the same cell
    /// both stay put; border moves clamp in place.
    pub fn step(&self, state: StateId, joint_action: [usize; 2]) -> (StateId, [f64; 2], bool) {
        let positions = self.positions_of(state);
        let targets = [
            self.move_target(positions[0], joint_action[0]),
            self.move_target(positions[1], joint_action[1]),
        ];
        let next = if targets[0] == targets[1] {
            positions
        } else {
            targets
        };
        let at_joint_goal =
            next[0] != next[1] && self.is_goal(next[0]) && self.is_goal(next[1]);
        let reward = if at_joint_goal {
            self.joint_goal_reward
        } else {
            self.step_penalty
        };
        (self.state_of(next), [reward, reward], at_joint_goal)
    }
}

/// A selectable environment.
#[derive(Debug, Clone)]
pub enum Game {
    Matrix(MatrixGame),
    Gridworld(GridworldGame),
}

impl Game {
    pub fn n_states(&self) -> usize {
        match self {
            Game::Matrix(_) => 1,
            Game::Gridworld(g) => g.n_states(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Game::Matrix(_) => 2,
            Game::Gridworld(_) => GRID_ACTIONS,
        }
    }

    pub fn initial_state(&self) -> StateId {
        match self {
            Game::Matrix(_) => StateId(0),
            Game::Gridworld(g) => g.initial_state(),
        }
    }

    /// Episode-step cap enforced by the training loop (None = every step
    /// is its own episode).
    pub fn max_episode_steps(&self) -> Option<u64> {
        match self {
            Game::Matrix(_) => None,
            Game::Gridworld(g) => Some(g.max_episode_steps),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Game::Matrix(m) => &m.name,
            Game::Gridworld(_) => "gridworld",
        }
    }

    pub fn is_zero_sum(&self) -> bool {
        matches!(self, Game::Matrix(m) if m.zero_sum)
    }
}

/// Advance the environment one step.
///
/// Matrix games return to state 0 with terminal=true after every step
/// (one-shot repeated play); the gridworld transitions deterministically.
/// The rng handle is the environment-noise hook; the built-in games
/// consume no randomness from it.
pub fn step(
    game: &Game,
    state: StateId,
    joint_action: [usize; 2],
    _rng: &mut ChaCha12Rng,
) -> Result<(StateId, [f64; 2], bool)> {
    if state.0 >= game.n_states() {
        return Err(Error::Contract(format!(
            "state {} out of range for game with {} states",
            state.0,
            game.n_states()
        )));
    }
    let n_actions = game.n_actions();
    if joint_action.iter().any(|&a| a >= n_actions) {
        return Err(Error::Contract(format!(
            "joint action {:?} out of range for {} actions",
            joint_action, n_actions
        )));
    }
    Ok(match game {
        Game::Matrix(m) => (StateId(0), m.rewards(joint_action[0], joint_action[1]), true),
        Game::Gridworld(g) => g.step(state, joint_action),
    })
}

/// How environment states are presented to function approximators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateEncoding {
    /// One-hot vector over state indices.
    OneHot,
    /// Normalized agent coordinates (x0, y0, x1, y1); gridworld only.
    Coords,
}

/// Input width of an encoding for a given game.
pub fn encoding_dim(game: &Game, enc: StateEncoding) -> Result<usize> {
    match (game, enc) {
        (_, StateEncoding::OneHot) => Ok(game.n_states()),
        (Game::Gridworld(_), StateEncoding::Coords) => Ok(4),
        (Game::Matrix(_), StateEncoding::Coords) => Err(Error::config(
            "agents.encoding",
            "coords encoding requires the gridworld game",
        )),
    }
}

/// Encode a state into `out` (must have length `encoding_dim`).
pub fn encode_state(game: &Game, enc: StateEncoding, state: StateId, out: &mut [f64]) {
    match (game, enc) {
        (_, StateEncoding::OneHot) => {
            out.fill(0.0);
            out[state.0] = 1.0;
        }
        (Game::Gridworld(g), StateEncoding::Coords) => {
            let [p0, p1] = g.positions_of(state);
            let wx = (g.width - 1).max(1) as f64;
            let wy = (g.height - 1).max(1) as f64;
            out[0] = p0.0 as f64 / wx;
            out[1] = p0.1 as f64 / wy;
            out[2] = p1.0 as f64 / wx;
            out[3] = p1.1 as f64 / wy;
        }
        (Game::Matrix(_), StateEncoding::Coords) => unreachable!("rejected at config time"),
    }
}
