//! Correlated-equilibrium and Hannan polytopes as linear systems over
//! distributions on pure profiles, optimization of the optimizer's utility
//! over them, and L1 projection onto them.

use std::fmt;
use std::str::FromStr;

use super::lp::{lp_solve, Direction, LinearSystem, LpOutcome};
use crate::error::{invalid_input, Error, Result};
use crate::game::{induce_game, GameSpec, JointDistribution, MixedStrategy};

/// Which set of learner distributions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetKind {
    /// Correlated equilibrium distributions: no profitable swap `a -> a'`.
    Correlated,
    /// Hannan set: no profitable constant deviation.
    Hannan,
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetKind::Correlated => "ced",
            SetKind::Hannan => "hannan",
        })
    }
}

impl FromStr for SetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ced" | "correlated" => Ok(SetKind::Correlated),
            "hannan" => Ok(SetKind::Hannan),
            _ => Err(invalid_input(format!("unknown set kind {s:?}"))),
        }
    }
}

fn simplex_system(game: &GameSpec) -> LinearSystem {
    let m = game.num_profiles();
    let mut system = LinearSystem::new(m);
    system
        .add_equality(vec![1.0; m], 1.0)
        .expect("well-formed simplex row");
    system
}

/// One variable per pure profile; nonnegativity is implicit in the LP
/// convention. For every player `i` and ordered pair `a != a'`:
/// `sum_{a_-i} phi(a, a_-i) (u_i(a', a_-i) - u_i(a, a_-i)) <= 0`.
pub fn build_ced_system(game: &GameSpec) -> LinearSystem {
    let mut system = simplex_system(game);
    let m = game.num_profiles();
    for i in 0..game.num_players() {
        let u = game.utilities(i);
        for a in 0..game.num_actions(i) {
            for alt in 0..game.num_actions(i) {
                if alt == a {
                    continue;
                }
                let mut coeffs = vec![0.0; m];
                for (idx, c) in coeffs.iter_mut().enumerate() {
                    if game.action_in(idx, i) == a {
                        *c = u[game.deviate(idx, i, alt)] - u[idx];
                    }
                }
                system
                    .add_inequality(coeffs, 0.0)
                    .expect("well-formed swap row");
            }
        }
    }
    system
}

/// For every player `i` and deviation `a'`:
/// `sum_a phi(a) (u_i(a', a_-i) - u_i(a)) <= 0`.
pub fn build_hannan_system(game: &GameSpec) -> LinearSystem {
    let mut system = simplex_system(game);
    for i in 0..game.num_players() {
        let u = game.utilities(i);
        for alt in 0..game.num_actions(i) {
            let coeffs: Vec<f64> = (0..game.num_profiles())
                .map(|idx| u[game.deviate(idx, i, alt)] - u[idx])
                .collect();
            system
                .add_inequality(coeffs, 0.0)
                .expect("well-formed deviation row");
        }
    }
    system
}

pub fn build_system(game: &GameSpec, kind: SetKind) -> LinearSystem {
    match kind {
        SetKind::Correlated => build_ced_system(game),
        SetKind::Hannan => build_hannan_system(game),
    }
}

/// Optimizer utility at its extreme over the learner polytope, with the
/// distribution attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeOptimum {
    pub value: f64,
    pub distribution: JointDistribution,
}

/// Optimizes the leader utility of an induced game over its polytope.
pub fn optimize_leader_utility(
    learner_game: &GameSpec,
    kind: SetKind,
    direction: Direction,
) -> Result<PolytopeOptimum> {
    let objective = learner_game.leader_utility().ok_or_else(|| {
        invalid_input("learner game carries no optimizer utility; build it with induce_game")
    })?;
    let system = build_system(learner_game, kind);
    match lp_solve(objective, direction, &system)? {
        LpOutcome::Optimal(sol) => Ok(PolytopeOptimum {
            value: sol.value,
            distribution: JointDistribution::from_approximate(
                (0..learner_game.num_players()).collect(),
                learner_game.sizes().to_vec(),
                sol.point,
            )?,
        }),
        other => Err(Error::Internal(format!(
            "{kind} polytope LP returned {other:?}; a finite game always has a correlated equilibrium"
        ))),
    }
}

/// `min` or `max` of `u_n(phi, alpha)` over `phi` in the chosen polytope of
/// the learners' game induced by `alpha`.
pub fn min_or_max_over_polytope(
    game: &GameSpec,
    alpha: &MixedStrategy,
    kind: SetKind,
    direction: Direction,
) -> Result<PolytopeOptimum> {
    let induced = induce_game(game, alpha)?;
    optimize_leader_utility(&induced, kind, direction)
}

/// Distance from a distribution to a polytope together with the nearest point.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub distance: f64,
    pub projection: JointDistribution,
}

/// L1 distance from `dist` to the chosen polytope of `learner_game` (any
/// game; the leader utility is not used).
///
/// Solved as one LP over `(phi, d)` with `d >= |dist - phi|` componentwise.
pub fn l1_projection(
    dist: &JointDistribution,
    learner_game: &GameSpec,
    kind: SetKind,
) -> Result<Projection> {
    let m = learner_game.num_profiles();
    let scope: Vec<usize> = (0..learner_game.num_players()).collect();
    if dist.scope() != scope.as_slice() || dist.sizes() != learner_game.sizes() {
        return Err(invalid_input(
            "distribution scope does not match the learners of the game",
        ));
    }
    let mut system = build_system(learner_game, kind).widened(2 * m);
    for (a, &z) in dist.probs().iter().enumerate() {
        let mut upper = vec![0.0; 2 * m];
        upper[a] = 1.0;
        upper[m + a] = -1.0;
        system.add_inequality(upper, z)?;
        let mut lower = vec![0.0; 2 * m];
        lower[a] = -1.0;
        lower[m + a] = -1.0;
        system.add_inequality(lower, -z)?;
    }
    let mut objective = vec![0.0; 2 * m];
    objective[m..].iter_mut().for_each(|c| *c = 1.0);
    match lp_solve(&objective, Direction::Minimize, &system)? {
        LpOutcome::Optimal(sol) => {
            let projection =
                JointDistribution::from_approximate(scope, learner_game.sizes().to_vec(), sol.point[..m].to_vec())?;
            Ok(Projection {
                distance: dist.l1_distance(&projection),
                projection,
            })
        }
        other => Err(Error::Internal(format!(
            "projection LP onto the {kind} polytope returned {other:?}"
        ))),
    }
}

/// L1 distance from a learner distribution to the polytope of the game
/// induced by `alpha`.
pub fn l1_distance_to_set(
    dist: &JointDistribution,
    game: &GameSpec,
    alpha: &MixedStrategy,
    kind: SetKind,
) -> Result<Projection> {
    let induced = induce_game(game, alpha)?;
    l1_projection(dist, &induced, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ce1_game, ce2_game};
    use crate::game::GameSpec;

    fn e() -> MixedStrategy {
        MixedStrategy::pure(2, 1, 0)
    }

    fn ge2() -> GameSpec {
        induce_game(&ce2_game(), &e()).unwrap()
    }

    #[test]
    fn ced_system_shape_for_two_by_two() {
        let s = build_ced_system(&ge2());
        assert_eq!(s.num_vars(), 4);
        assert_eq!(s.inequalities().len(), 4);
        assert_eq!(s.equalities().len(), 1);
        let h = build_hannan_system(&ge2());
        assert_eq!(h.inequalities().len(), 4);
    }

    #[test]
    fn pure_nash_point_mass_is_correlated() {
        let s = build_ced_system(&ge2());
        assert!(s.is_satisfied(&[1.0, 0.0, 0.0, 0.0], 1e-12));
        // (B,L) alone violates player 1's swap B -> T
        assert!(!s.is_satisfied(&[0.0, 0.0, 1.0, 0.0], 1e-12));
    }

    #[test]
    fn uniform_is_in_the_hannan_set() {
        let h = build_hannan_system(&ge2());
        assert!(h.is_satisfied(&[0.25; 4], 1e-12));
    }

    #[test]
    fn constant_games_accept_everything() {
        let g = GameSpec::from_sizes(&[2, 3], vec![vec![2.0; 6], vec![2.0; 6]]).unwrap();
        let point = [0.1, 0.2, 0.3, 0.0, 0.15, 0.25];
        assert!(build_ced_system(&g).is_satisfied(&point, 1e-12));
        assert!(build_hannan_system(&g).is_satisfied(&point, 1e-12));
    }

    #[test]
    fn swap_objective_minimum_on_counterexample_two() {
        // minimize phi(T,R) - phi(B,L) over the CED of G_E
        let s = build_ced_system(&ge2());
        let sol = lp_solve(&[0.0, 1.0, -1.0, 0.0], Direction::Minimize, &s)
            .unwrap()
            .optimal()
            .unwrap();
        assert!((sol.value + 1.0 / 3.0).abs() < 1e-12);
        for (a, want) in [(0, 1.0 / 3.0), (1, 0.0), (2, 1.0 / 3.0), (3, 1.0 / 3.0)] {
            assert!((sol.point[a] - want).abs() < 1e-12, "{:?}", sol.point);
        }
    }

    #[test]
    fn optimizer_extremes_over_counterexample_polytopes() {
        let min2 = min_or_max_over_polytope(&ce2_game(), &e(), SetKind::Correlated, Direction::Minimize)
            .unwrap();
        assert!((min2.value + 1.0 / 3.0).abs() < 1e-12);
        let min1 = min_or_max_over_polytope(&ce1_game(), &e(), SetKind::Correlated, Direction::Minimize)
            .unwrap();
        assert!(min1.value.abs() < 1e-12);
        let max1 = min_or_max_over_polytope(&ce1_game(), &e(), SetKind::Correlated, Direction::Maximize)
            .unwrap();
        assert!((max1.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_learner_fixes_the_value() {
        // learner (rows) has dominant action 1; optimizer (columns) has 2 actions
        let g = GameSpec::from_sizes(
            &[2, 2],
            vec![vec![0.0, 0.0, 1.0, 1.0], vec![5.0, -5.0, 2.0, 3.0]],
        )
        .unwrap();
        let alpha = MixedStrategy::new(1, vec![0.25, 0.75]).unwrap();
        let want = 0.25 * 2.0 + 0.75 * 3.0;
        for kind in [SetKind::Correlated, SetKind::Hannan] {
            for dir in [Direction::Minimize, Direction::Maximize] {
                let v = min_or_max_over_polytope(&g, &alpha, kind, dir).unwrap().value;
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distances_on_counterexample_two() {
        let g = ce2_game();
        let inside = JointDistribution::over_learners(&g, vec![1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0])
            .unwrap();
        let d = l1_distance_to_set(&inside, &g, &e(), SetKind::Correlated).unwrap();
        assert!(d.distance < 1e-9);

        let bl = JointDistribution::over_learners(&g, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let d = l1_distance_to_set(&bl, &g, &e(), SetKind::Correlated).unwrap();
        assert!(d.distance > 0.1);
        let again = l1_distance_to_set(&d.projection, &g, &e(), SetKind::Correlated).unwrap();
        assert!(again.distance < 1e-9);
    }
}
