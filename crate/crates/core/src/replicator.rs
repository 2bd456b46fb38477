//! Two-population replicator dynamics for 2x2 games: closed-form
//! right-hand side, RK4 integration, and vector-field grids for phase
//! portraits.
//!
//! The state is (x, y) where x is agent 0's share of action 0 and y is
//! agent 1's. With expected payoffs taken against the opponent mixture,
//! the two-action reduction eliminates the average-fitness term:
//! dx = x(1-x)(f_0 - f_1), and symmetrically for dy.

use crate::error::{Error, Result};
use crate::game_env::MatrixGame;

/// Point on the product of the two agents' strategy simplices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicatorState {
    pub x: f64,
    pub y: f64,
}

impl ReplicatorState {
    pub fn new(x: f64, y: f64) -> Self {
        ReplicatorState { x, y }
    }

    fn clamp(self) -> Self {
        ReplicatorState {
            x: self.x.clamp(0.0, 1.0),
            y: self.y.clamp(0.0, 1.0),
        }
    }
}

/// Uniform grid of field samples over [0,1]^2, boundary included.
#[derive(Debug, Clone)]
pub struct VectorFieldGrid {
    pub resolution: usize,
    /// (x, y, dx, dy) per sample point, row-major in y then x.
    pub points: Vec<(f64, f64, f64, f64)>,
}

/// Replicator right-hand side at `state` for `game`.
pub fn replicator_rhs(state: ReplicatorState, game: &MatrixGame) -> Result<(f64, f64)> {
    let (x, y) = (state.x, state.y);
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::Contract(format!(
            "replicator state ({x}, {y}) outside [0,1]^2"
        )));
    }
    // Agent 0's expected payoff for each action against mixture (y, 1-y).
    let f0 = game.payoffs[0][0][0] * y + game.payoffs[0][0][1] * (1.0 - y);
    let f1 = game.payoffs[0][1][0] * y + game.payoffs[0][1][1] * (1.0 - y);
    // Agent 1's expected payoff for each action against mixture (x, 1-x).
    let g0 = game.payoffs[1][0][0] * x + game.payoffs[1][1][0] * (1.0 - x);
    let g1 = game.payoffs[1][0][1] * x + game.payoffs[1][1][1] * (1.0 - x);
    Ok((x * (1.0 - x) * (f0 - f1), y * (1.0 - y) * (g0 - g1)))
}

/// Classical fourth-order Runge-Kutta on the replicator field.
///
/// The boundary of [0,1]^2 is invariant analytically; coordinates are
/// clamped after each step to absorb roundoff only. Returns n_steps + 1
/// states including the initial condition.
pub fn integrate_rk4(
    game: &MatrixGame,
    initial: ReplicatorState,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<ReplicatorState>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Contract(format!("dt must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut s = initial.clamp();
    out.push(s);
    for _ in 0..n_steps {
        let k1 = replicator_rhs(s, game)?;
        let k2 = replicator_rhs(
            ReplicatorState::new(s.x + 0.5 * dt * k1.0, s.y + 0.5 * dt * k1.1).clamp(),
            game,
        )?;
        let k3 = replicator_rhs(
            ReplicatorState::new(s.x + 0.5 * dt * k2.0, s.y + 0.5 * dt * k2.1).clamp(),
            game,
        )?;
        let k4 = replicator_rhs(
            ReplicatorState::new(s.x + dt * k3.0, s.y + dt * k3.1).clamp(),
            game,
        )?;
        s = ReplicatorState::new(
            s.x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            s.y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
        .clamp();
        out.push(s);
    }
    Ok(out)
}

/// Sample the field on a resolution x resolution grid.
pub fn vector_field(game: &MatrixGame, resolution: usize) -> Result<VectorFieldGrid> {
    if resolution < 2 {
        return Err(Error::Contract("vector field resolution must be >= 2".to_string()));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let mut points = Vec::with_capacity(resolution * resolution);
    for yi in 0..resolution {
        for xi in 0..resolution {
            let x = xi as f64 * step;
            let y = yi as f64 * step;
            let (dx, dy) = replicator_rhs(ReplicatorState::new(x, y), game)?;
            points.push((x, y, dx, dy));
        }
    }
    Ok(VectorFieldGrid { resolution, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_env::make_matrix_game;

    #[test]
    fn matching_pennies_center_is_a_fixed_point() {
        let mp = make_matrix_game("matching_pennies").unwrap();
        let (dx, dy) = replicator_rhs(ReplicatorState::new(0.5, 0.5), &mp).unwrap();
        assert_eq!(dx, 0.0);
        assert_eq!(dy, 0.0);
    }

    #[test]
    fn boundary_faces_pin_their_coordinate() {
        let pd = make_matrix_game("prisoners_dilemma").unwrap();
        for y in [0.0, 0.3, 1.0] {
            let (dx, _) = replicator_rhs(ReplicatorState::new(0.0, y), &pd).unwrap();
            assert_eq!(dx, 0.0);
            let (dx, _) = replicator_rhs(ReplicatorState::new(1.0, y), &pd).unwrap();
            assert_eq!(dx, 0.0);
        }
    }

    #[test]
    fn prisoners_dilemma_center_drifts_toward_first_action() {
        let pd = make_matrix_game("prisoners_dilemma").unwrap();
        let (dx, dy) = replicator_rhs(ReplicatorState::new(0.5, 0.5), &pd).unwrap();
        // f_0 = (1+5)/2 = 3, f_1 = (0+3)/2 = 1.5, dx = 0.25 * 1.5
        assert!((dx - 0.375).abs() < 1e-15);
        assert!((dy - 0.375).abs() < 1e-15);
    }

    #[test]
    fn first_action_dominance_makes_dx_positive_everywhere_interior() {
        let pd = make_matrix_game("prisoners_dilemma").unwrap();
        for xi in 1..20 {
            for yi in 1..20 {
                let s = ReplicatorState::new(xi as f64 / 20.0, yi as f64 / 20.0);
                let (dx, _) = replicator_rhs(s, &pd).unwrap();
                assert!(dx > 0.0, "dx <= 0 at ({}, {})", s.x, s.y);
            }
        }
    }

    #[test]
    fn vertices_are_exact_fixed_points_for_all_games() {
        for name in ["prisoners_dilemma", "matching_pennies", "stag_hunt", "chicken"] {
            let game = make_matrix_game(name).unwrap();
            for x in [0.0, 1.0] {
                for y in [0.0, 1.0] {
                    let (dx, dy) = replicator_rhs(ReplicatorState::new(x, y), &game).unwrap();
                    assert_eq!((dx, dy), (0.0, 0.0), "{name} vertex ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn vertex_initial_condition_stays_fixed_under_rk4() {
        let sh = make_matrix_game("stag_hunt").unwrap();
        let traj = integrate_rk4(&sh, ReplicatorState::new(0.0, 0.0), 0.01, 100).unwrap();
        for s in traj {
            assert_eq!((s.x, s.y), (0.0, 0.0));
        }
    }

    #[test]
    fn pd_interior_trajectory_converges_to_dominant_vertex() {
        let pd = make_matrix_game("prisoners_dilemma").unwrap();
        let traj = integrate_rk4(&pd, ReplicatorState::new(0.5, 0.5), 0.01, 10_000).unwrap();
        let end = traj.last().unwrap();
        assert!((end.x - 1.0).abs() < 1e-3 && (end.y - 1.0).abs() < 1e-3);
    }

    /// Conserved quantity of the zero-sum matching-pennies field relative
    /// to the mixed equilibrium (0.5, 0.5): a KL-type sum over both
    /// coordinates. Constant along exact orbits.
    fn mp_invariant(s: ReplicatorState) -> f64 {
        let kl = |p: f64| 0.5 * (0.5 / p).ln() + 0.5 * (0.5 / (1.0 - p)).ln();
        kl(s.x) + kl(s.y)
    }

    #[test]
    fn matching_pennies_invariant_is_nearly_conserved_under_rk4() {
        let mp = make_matrix_game("matching_pennies").unwrap();
        let dt = 1e-3;
        let steps = 1000; // one unit of time
        let traj = integrate_rk4(&mp, ReplicatorState::new(0.7, 0.5), dt, steps).unwrap();
        let v0 = mp_invariant(traj[0]);
        let v1 = mp_invariant(*traj.last().unwrap());
        assert!((v1 - v0).abs() < 1e-6, "drift {}", (v1 - v0).abs());
    }

    #[test]
    fn matching_pennies_orbit_closes() {
        // First return to the section {y = 0.5, x > 0.5, dy < 0} completes
        // one period; linear interpolation localizes the crossing.
        let mp = make_matrix_game("matching_pennies").unwrap();
        let dt = 1e-3;
        let start = ReplicatorState::new(0.7, 0.5);
        let traj = integrate_rk4(&mp, start, dt, 40_000).unwrap();
        let mut best: Option<f64> = None;
        for w in traj.windows(2).skip(100) {
            let (a, b) = (w[0], w[1]);
            if a.y >= 0.5 && b.y < 0.5 && a.x > 0.5 {
                let t = (a.y - 0.5) / (a.y - b.y);
                let x = a.x + t * (b.x - a.x);
                let err = ((x - start.x).powi(2) + 0.0).sqrt();
                best = Some(err);
                break;
            }
        }
        let err = best.expect("orbit should return to the section");
        assert!(err < 1e-3, "closure error {err}");
    }

    #[test]
    fn rk4_agrees_with_euler_oracle() {
        // Independent integration route: forward Euler at a much finer step.
        let pd = make_matrix_game("prisoners_dilemma").unwrap();
        let t_final = 5.0;
        let rk = integrate_rk4(&pd, ReplicatorState::new(0.3, 0.6), 0.01, 500).unwrap();
        let mut s = ReplicatorState::new(0.3, 0.6);
        let fine = 1e-4;
        for _ in 0..(t_final / fine) as usize {
            let (dx, dy) = replicator_rhs(s, &pd).unwrap();
            s = ReplicatorState::new(s.x + fine * dx, s.y + fine * dy).clamp();
        }
        let end = rk.last().unwrap();
        assert!((end.x - s.x).abs() < 1e-4, "x: {} vs {}", end.x, s.x);
        assert!((end.y - s.y).abs() < 1e-4, "y: {} vs {}", end.y, s.y);
    }

    #[test]
    fn vector_field_grid_shape_and_corners() {
        let mp = make_matrix_game("matching_pennies").unwrap();
        let grid = vector_field(&mp, 15).unwrap();
        assert_eq!(grid.points.len(), 225);
        for &(x, y, dx, dy) in &grid.points {
            if (x == 0.0 || x == 1.0) && (y == 0.0 || y == 1.0) {
                assert_eq!((dx, dy), (0.0, 0.0));
            }
        }
        // Center sample has zero magnitude for MP.
        let center = grid
            .points
            .iter()
            .find(|&&(x, y, _, _)| x == 0.5 && y == 0.5)
            .unwrap();
        assert_eq!((center.2, center.3), (0.0, 0.0));
    }
}
