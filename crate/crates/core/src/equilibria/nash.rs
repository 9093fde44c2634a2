//! Pure and mixed Nash equilibria of small games.
//!
//! Mixed equilibria of one- and two-player games are enumerated exactly as
//! the vertices of best-reply polytopes: for every pair of claimed
//! best-reply sets `(T1, T2)` the equilibria with `supp(x1) ⊆ T1 ⊆ BR1(x2)`
//! and `supp(x2) ⊆ T2 ⊆ BR2(x1)` form a product of two polytopes, and every
//! vertex pair is an equilibrium. Any bilinear function of the profile is
//! therefore extremized over the equilibrium set at one of the returned
//! profiles, which is what the Stackelberg value searches rely on.
//!
//! Three-player games are solved per support triple by Newton's method on
//! the indifference equations from a fixed set of starting points, keeping
//! only solutions that pass a best-reply check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{product_weights, GameSpec, MixedProfile, MixedStrategy, BEST_REPLY_TOL};

pub const MAX_ENUM_PLAYERS: usize = 3;
pub const MAX_ENUM_ACTIONS: usize = 4;

/// Best-reply tolerance used to accept a numerically computed equilibrium.
pub const VERIFY_TOL: f64 = 1e-7;

const DEDUP_TOL: f64 = 1e-7;
const NEWTON_STARTS: usize = 6;
const NEWTON_ITERS: usize = 40;

/// Pure profiles in which every player's action is a best reply.
pub fn pure_nash_profiles(game: &GameSpec) -> Vec<Vec<usize>> {
    (0..game.num_profiles())
        .filter(|&idx| is_pure_nash(game, idx))
        .map(|idx| game.decode_profile(idx))
        .collect()
}

pub(crate) fn is_pure_nash(game: &GameSpec, idx: usize) -> bool {
    (0..game.num_players()).all(|i| {
        let u = game.utilities(i);
        let current = u[idx];
        (0..game.num_actions(i)).all(|b| u[game.deviate(idx, i, b)] <= current + BEST_REPLY_TOL)
    })
}

pub fn check_enumeration_size(game: &GameSpec) -> Result<()> {
    if game.num_players() > MAX_ENUM_PLAYERS
        || game.sizes().iter().any(|&k| k > MAX_ENUM_ACTIONS)
    {
        return Err(Error::UnsupportedSize(format!(
            "mixed equilibrium enumeration supports at most {} players with at most {} actions each; got action counts {:?}",
            MAX_ENUM_PLAYERS,
            MAX_ENUM_ACTIONS,
            game.sizes()
        )));
    }
    Ok(())
}

/// All mixed Nash equilibria for nondegenerate games; for degenerate
/// one- and two-player games, the extreme equilibria.
pub fn mixed_nash_support_enumeration(game: &GameSpec) -> Result<Vec<MixedProfile>> {
    check_enumeration_size(game)?;
    let raw = match game.num_players() {
        1 => one_player(game),
        2 => two_player(game),
        _ => three_player(game),
    };
    let mut found: Vec<Vec<Vec<f64>>> = Vec::new();
    for profile in raw {
        if !is_nash(game, &profile, VERIFY_TOL) {
            continue;
        }
        if !found.iter().any(|f| same_profile(f, &profile)) {
            found.push(profile);
        }
    }
    found
        .into_iter()
        .map(|p| {
            let strategies = p
                .into_iter()
                .enumerate()
                .map(|(i, probs)| MixedStrategy::from_approximate(i, probs))
                .collect::<Result<Vec<_>>>()?;
            MixedProfile::new(strategies)
        })
        .collect()
}

fn same_profile(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| x.iter().zip(y).all(|(p, q)| (p - q).abs() < DEDUP_TOL))
}

/// Expected utility of each action of `player` when the others play `profile`.
fn action_values(game: &GameSpec, profile: &[Vec<f64>], player: usize) -> Vec<f64> {
    let mut values = vec![0.0; game.num_actions(player)];
    let u = game.utilities(player);
    for (idx, &payoff) in u.iter().enumerate() {
        let mut w = 1.0;
        for (j, s) in profile.iter().enumerate() {
            if j != player {
                w *= s[game.action_in(idx, j)];
            }
        }
        values[game.action_in(idx, player)] += w * payoff;
    }
    values
}

fn is_nash(game: &GameSpec, profile: &[Vec<f64>], tol: f64) -> bool {
    for (i, s) in profile.iter().enumerate() {
        if s.iter().any(|&p| p < -tol) || (s.iter().sum::<f64>() - 1.0).abs() > tol {
            return false;
        }
        let values = action_values(game, profile, i);
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let own: f64 = s.iter().zip(&values).map(|(p, v)| p * v).sum();
        if own < best - tol {
            return false;
        }
    }
    true
}

fn one_player(game: &GameSpec) -> Vec<Vec<Vec<f64>>> {
    let k = game.num_actions(0);
    pure_nash_profiles(game)
        .into_iter()
        .map(|p| {
            let mut s = vec![0.0; k];
            s[p[0]] = 1.0;
            vec![s]
        })
        .collect()
}

fn subsets(k: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << k)).map(move |mask| (0..k).filter(|&a| mask & (1 << a) != 0).collect())
}

fn two_player(game: &GameSpec) -> Vec<Vec<Vec<f64>>> {
    let (k0, k1) = (game.num_actions(0), game.num_actions(1));
    let mut out = Vec::new();
    for t0 in subsets(k0) {
        for t1 in subsets(k1) {
            let q0 = best_reply_polytope_vertices(game, 0, &t0, &t1);
            if q0.is_empty() {
                continue;
            }
            let q1 = best_reply_polytope_vertices(game, 1, &t1, &t0);
            for x0 in &q0 {
                for x1 in &q1 {
                    out.push(vec![x0.clone(), x1.clone()]);
                }
            }
        }
    }
    out
}

/// Vertices of `{x supported on chooser_set : responder_set ⊆ BR(x)}` in a
/// two-player game, as full-length strategies of `chooser`.
fn best_reply_polytope_vertices(
    game: &GameSpec,
    chooser: usize,
    chooser_set: &[usize],
    responder_set: &[usize],
) -> Vec<Vec<f64>> {
    let responder = 1 - chooser;
    let u = game.utilities(responder);
    let payoff = |c: usize, r: usize| {
        let mut profile = [0usize; 2];
        profile[chooser] = c;
        profile[responder] = r;
        u[game.profile_index(&profile)]
    };
    let dim = chooser_set.len();
    let r0 = responder_set[0];
    let mut equalities: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; dim], 1.0)];
    for &r in &responder_set[1..] {
        equalities.push((
            chooser_set.iter().map(|&c| payoff(c, r) - payoff(c, r0)).collect(),
            0.0,
        ));
    }
    // Inequalities `g . x >= 0`.
    let mut inequalities: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            e
        })
        .collect();
    for r in 0..game.num_actions(responder) {
        if !responder_set.contains(&r) {
            inequalities.push(chooser_set.iter().map(|&c| payoff(c, r0) - payoff(c, r)).collect());
        }
    }

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let num_ineq = inequalities.len();
    for mask in 0u32..(1 << num_ineq) {
        if (mask.count_ones() as usize) > dim {
            continue;
        }
        let mut rows: Vec<Vec<f64>> = equalities.iter().map(|(r, _)| r.clone()).collect();
        let mut rhs: Vec<f64> = equalities.iter().map(|(_, b)| *b).collect();
        for (j, g) in inequalities.iter().enumerate() {
            if mask & (1 << j) != 0 {
                rows.push(g.clone());
                rhs.push(0.0);
            }
        }
        let Some(x) = solve_unique(&rows, &rhs, dim) else {
            continue;
        };
        let feasible = inequalities
            .iter()
            .all(|g| g.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() >= -1e-10);
        if !feasible {
            continue;
        }
        let mut full = vec![0.0; game.num_actions(chooser)];
        for (j, &c) in chooser_set.iter().enumerate() {
            full[c] = x[j].max(0.0);
        }
        if !vertices
            .iter()
            .any(|v| v.iter().zip(&full).all(|(a, b)| (a - b).abs() < 1e-10))
        {
            vertices.push(full);
        }
    }
    vertices
}

/// The unique solution of an (over)determined consistent system with full
/// column rank, by Gaussian elimination with partial pivoting.
pub(crate) fn solve_unique(rows: &[Vec<f64>], rhs: &[f64], ncols: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(*b);
            row
        })
        .collect();
    let m = a.len();
    if m < ncols {
        return None;
    }
    for col in 0..ncols {
        let (pivot, max) = (col..m)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if max < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    // Leftover rows must be consistent.
    if a[ncols..].iter().any(|row| row[ncols].abs() > 1e-9) {
        return None;
    }
    Some((0..ncols).map(|c| a[c][ncols]).collect())
}

fn three_player(game: &GameSpec) -> Vec<Vec<Vec<f64>>> {
    let sizes = game.sizes().to_vec();
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for s0 in subsets(sizes[0]) {
        for s1 in subsets(sizes[1]) {
            for s2 in subsets(sizes[2]) {
                let supports = [s0.clone(), s1.clone(), s2.clone()];
                let dim: usize = supports.iter().map(|s| s.len() - 1).sum();
                if dim == 0 {
                    let profile = expand(&sizes, &supports, &[]);
                    out.push(profile);
                    continue;
                }
                for start in 0..NEWTON_STARTS {
                    let theta0: Vec<f64> = if start == 0 {
                        supports
                            .iter()
                            .flat_map(|s| vec![1.0 / s.len() as f64; s.len() - 1])
                            .collect()
                    } else {
                        random_interior(&supports, &mut rng)
                    };
                    if let Some(theta) = newton(game, &supports, theta0) {
                        out.push(expand(&sizes, &supports, &theta));
                    }
                }
            }
        }
    }
    out
}

fn random_interior(supports: &[Vec<usize>; 3], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut theta = Vec::new();
    for s in supports {
        let w: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sum: f64 = w.iter().sum();
        theta.extend(w[..s.len() - 1].iter().map(|x| x / sum));
    }
    theta
}

/// Full strategies from free coordinates: the first `|S|-1` support
/// probabilities of each player; the last support action takes the rest.
fn expand(sizes: &[usize], supports: &[Vec<usize>; 3], theta: &[f64]) -> Vec<Vec<f64>> {
    let mut offset = 0;
    supports
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut x = vec![0.0; sizes[i]];
            let free = &theta[offset..offset + s.len() - 1];
            offset += s.len() - 1;
            let mut rest = 1.0;
            for (j, &a) in s[..s.len() - 1].iter().enumerate() {
                x[a] = free[j];
                rest -= free[j];
            }
            x[*s.last().expect("nonempty support")] = rest;
            x
        })
        .collect()
}

fn indifference(game: &GameSpec, supports: &[Vec<usize>; 3], theta: &[f64]) -> Vec<f64> {
    let profile = expand(game.sizes(), supports, theta);
    let mut f = Vec::new();
    for (i, s) in supports.iter().enumerate() {
        let values = action_values(game, &profile, i);
        for &a in &s[1..] {
            f.push(values[a] - values[s[0]]);
        }
    }
    f
}

fn newton(game: &GameSpec, supports: &[Vec<usize>; 3], mut theta: Vec<f64>) -> Option<Vec<f64>> {
    let dim = theta.len();
    for _ in 0..NEWTON_ITERS {
        let f = indifference(game, supports, &theta);
        let norm = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if norm < 1e-13 {
            return Some(theta);
        }
        if !norm.is_finite() || theta.iter().any(|t| t.abs() > 1e3) {
            return None;
        }
        // The map is multilinear, so a unit finite difference is an exact
        // directional derivative.
        let mut jac = vec![vec![0.0; dim]; dim];
        for c in 0..dim {
            let mut shifted = theta.clone();
            shifted[c] += 1.0;
            let fs = indifference(game, supports, &shifted);
            for r in 0..dim {
                jac[r][c] = fs[r] - f[r];
            }
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let step = solve_unique(&jac, &neg, dim)?;
        for (t, s) in theta.iter_mut().zip(&step) {
            *t += s;
        }
    }
    let f = indifference(game, supports, &theta);
    (f.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-10).then_some(theta)
}

/// Expected value of a per-profile quantity (indexed like `game`) under a
/// product of the profile's strategies.
pub(crate) fn profile_expectation(values: &[f64], profile: &MixedProfile) -> f64 {
    product_weights(profile.strategies().iter().map(|s| s.probs()))
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ce1_game, ce2_game};
    use crate::game::induce_game;

    fn ge(g: &GameSpec) -> GameSpec {
        induce_game(g, &MixedStrategy::pure(2, 1, 0)).unwrap()
    }

    fn matching_pennies() -> GameSpec {
        GameSpec::from_sizes(
            &[2, 2],
            vec![vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 1.0, -1.0]],
        )
        .unwrap()
    }

    #[test]
    fn pure_nash_examples() {
        assert_eq!(pure_nash_profiles(&ge(&ce1_game())), vec![vec![0, 0], vec![1, 1]]);
        assert!(pure_nash_profiles(&matching_pennies()).is_empty());
        let dominant = GameSpec::from_sizes(
            &[2, 2],
            vec![vec![3.0, 0.0, 5.0, 1.0], vec![3.0, 5.0, 0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(pure_nash_profiles(&dominant), vec![vec![1, 1]]);
    }

    #[test]
    fn coordination_game_has_three_equilibria() {
        let eq = mixed_nash_support_enumeration(&ge(&ce2_game())).unwrap();
        assert_eq!(eq.len(), 3);
        let has = |p: [f64; 2], q: [f64; 2]| {
            eq.iter().any(|e| {
                let a = e.strategies()[0].probs();
                let b = e.strategies()[1].probs();
                (a[0] - p[0]).abs() < 1e-9 && (b[0] - q[0]).abs() < 1e-9 && a.len() == 2 && b.len() == 2
                    && (a[1] - p[1]).abs() < 1e-9 && (b[1] - q[1]).abs() < 1e-9
            })
        };
        assert!(has([1.0, 0.0], [1.0, 0.0]));
        assert!(has([0.0, 1.0], [0.0, 1.0]));
        assert!(has([0.5, 0.5], [0.5, 0.5]));
    }

    #[test]
    fn matching_pennies_has_the_uniform_equilibrium_only() {
        let eq = mixed_nash_support_enumeration(&matching_pennies()).unwrap();
        assert_eq!(eq.len(), 1);
        for s in eq[0].strategies() {
            assert!((s.probs()[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_profile_is_unique() {
        let dominant = GameSpec::from_sizes(
            &[2, 2],
            vec![vec![3.0, 0.0, 5.0, 1.0], vec![3.0, 5.0, 0.0, 1.0]],
        )
        .unwrap();
        let eq = mixed_nash_support_enumeration(&dominant).unwrap();
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].strategies()[0].as_pure(), Some(1));
        assert_eq!(eq[0].strategies()[1].as_pure(), Some(1));
    }

    #[test]
    fn one_player_equilibria_are_best_actions() {
        let g = GameSpec::from_sizes(&[3], vec![vec![1.0, 2.0, 2.0]]).unwrap();
        let eq = mixed_nash_support_enumeration(&g).unwrap();
        assert_eq!(eq.len(), 2);
    }

    #[test]
    fn three_player_game_with_a_known_mixed_equilibrium() {
        // Each player gets 1 for matching the next player (cyclically) and 0
        // otherwise; uniform mixing by all is an equilibrium.
        let sizes = [2, 2, 2];
        let mut utilities = vec![vec![0.0; 8]; 3];
        for idx in 0..8 {
            let a = [(idx >> 2) & 1, (idx >> 1) & 1, idx & 1];
            for i in 0..3 {
                let next = (i + 1) % 3;
                utilities[i][idx] = if a[i] == a[next] { 1.0 } else { 0.0 };
            }
        }
        let g = GameSpec::from_sizes(&sizes, utilities).unwrap();
        let eq = mixed_nash_support_enumeration(&g).unwrap();
        assert!(eq.iter().any(|e| e
            .strategies()
            .iter()
            .all(|s| (s.probs()[0] - 0.5).abs() < 1e-9)));
        // pure coordination profiles
        assert!(eq.iter().any(|e| e.strategies().iter().all(|s| s.as_pure() == Some(0))));
        assert!(eq.iter().any(|e| e.strategies().iter().all(|s| s.as_pure() == Some(1))));
    }

    #[test]
    fn size_cap_is_enforced() {
        let big = GameSpec::from_sizes(&[5, 2], vec![vec![0.0; 10], vec![0.0; 10]]).unwrap();
        assert!(matches!(
            mixed_nash_support_enumeration(&big),
            Err(Error::UnsupportedSize(_))
        ));
        let many = GameSpec::from_sizes(&[1, 1, 1, 1], vec![vec![0.0]; 4]).unwrap();
        assert!(matches!(
            mixed_nash_support_enumeration(&many),
            Err(Error::UnsupportedSize(_))
        ));
    }
}
