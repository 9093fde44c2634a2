//! Stackelberg values of the optimizer against learners who answer its
//! committed mixed strategy with a Nash equilibrium (pure or mixed,
//! optimistic or pessimistic), a correlated equilibrium, or a Hannan-set
//! distribution of the induced game.
//!
//! Only the optimistic pure value is computed exactly (one LP per pure
//! learner profile). The others maximize over the optimizer's simplex with a
//! uniform grid followed by two local refinement passes at half and quarter
//! mesh; their inner problems are solved exactly.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use super::lp::{lp_solve, Direction, LinearSystem, LpOutcome};
use super::nash::{
    check_enumeration_size, is_pure_nash, mixed_nash_support_enumeration, profile_expectation,
};
use super::polytope::{optimize_leader_utility, SetKind};
use crate::error::{invalid_input, Result};
use crate::format::sig12;
use crate::game::{induce_game, GameSpec, JointDistribution, MixedProfile, MixedStrategy};

pub const DEFAULT_GRID_RESOLUTION: f64 = 1.0 / 50.0;

/// Slack allowed when checking the ordering of the values in a report.
pub const DEFAULT_CHAIN_TOLERANCE: f64 = 0.02;

const VALUE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    ExactLp,
    Grid { resolution: f64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::ExactLp => f.write_str("exact-lp"),
            Method::Grid { resolution } => write!(f, "grid({})", sig12(*resolution)),
        }
    }
}

/// The learners' answer that realizes a value.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Pure(Vec<usize>),
    Mixed(MixedProfile),
    Correlated(JointDistribution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackelbergValue {
    pub value: f64,
    pub alpha: MixedStrategy,
    pub response: Response,
    pub method: Method,
}

fn method_for(game: &GameSpec, resolution: f64) -> Method {
    if game.num_actions(game.optimizer()) == 1 {
        Method::ExactLp
    } else {
        Method::Grid { resolution }
    }
}

fn check_game(game: &GameSpec) -> Result<()> {
    if game.num_players() < 2 {
        return Err(invalid_input(
            "Stackelberg values need an optimizer and at least one learner",
        ));
    }
    Ok(())
}

fn check_resolution(resolution: f64) -> Result<usize> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(invalid_input(format!(
            "grid resolution must lie in (0, 1], got {resolution}"
        )));
    }
    Ok(((1.0 / resolution).round() as usize).max(1))
}

/// All points of the `k`-simplex whose coordinates are multiples of
/// `1/divisions`, in lexicographic order.
pub fn simplex_grid(k: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, divisions: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == k - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&c| c as f64 / divisions as f64).collect());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(k, left - c, divisions, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, divisions, divisions, &mut Vec::new(), &mut out);
    out
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

struct Best<W> {
    alpha: Vec<f64>,
    value: f64,
    witness: W,
}

/// Keeps the larger value; ties go to the lexicographically smaller alpha.
fn better<W>(current: Option<Best<W>>, candidate: Best<W>) -> Option<Best<W>> {
    match current {
        None => Some(candidate),
        Some(cur) => {
            let diff = candidate.value - cur.value;
            if diff > VALUE_TIE_TOL
                || diff.abs() <= VALUE_TIE_TOL && lex_cmp(&candidate.alpha, &cur.alpha) == Ordering::Less
            {
                Some(candidate)
            } else {
                Some(cur)
            }
        }
    }
}

/// Maximizes `eval` over the optimizer's simplex. `eval` returns `None` where
/// the inner problem is empty. Grid points are evaluated in parallel and
/// reduced in grid order.
fn maximize_over_simplex<W, F>(k: usize, resolution: f64, eval: F) -> Result<Option<Best<W>>>
where
    W: Send,
    F: Fn(&[f64]) -> Result<Option<(f64, W)>> + Sync,
{
    let divisions = check_resolution(resolution)?;
    let evaluate_all = |points: Vec<Vec<f64>>| -> Result<Option<Best<W>>> {
        let results: Vec<Result<Option<(f64, W)>>> = points.par_iter().map(|a| eval(a)).collect();
        let mut best = None;
        for (alpha, r) in points.into_iter().zip(results) {
            if let Some((value, witness)) = r? {
                best = better(best, Best { alpha, value, witness });
            }
        }
        Ok(best)
    };

    if k == 1 {
        return evaluate_all(vec![vec![1.0]]);
    }
    let mut best = evaluate_all(simplex_grid(k, divisions))?;
    let mesh = 1.0 / divisions as f64;
    for step in [mesh / 2.0, mesh / 4.0] {
        let Some(center) = best.as_ref().map(|b| b.alpha.clone()) else {
            break;
        };
        let mut neighbours = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if i == j || center[j] < step - 1e-15 {
                    continue;
                }
                let mut a = center.clone();
                a[i] += step;
                a[j] = (a[j] - step).max(0.0);
                neighbours.push(a);
            }
        }
        if let Some(local) = evaluate_all(neighbours)? {
            best = match best {
                Some(b) => better(Some(b), local),
                None => Some(local),
            };
        }
    }
    Ok(best)
}

fn alpha_strategy(game: &GameSpec, probs: &[f64]) -> Result<MixedStrategy> {
    MixedStrategy::from_approximate(game.optimizer(), probs.to_vec())
}

/// Optimistic and pessimistic values with pure learner responses. Either may
/// not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStackelberg {
    pub optimistic: Option<StackelbergValue>,
    pub pessimistic: Option<StackelbergValue>,
    /// Every point of the base grid induces a game with a pure Nash
    /// equilibrium, so `pessimistic` is a maximum over the whole simplex.
    pub covers_grid: bool,
}

/// `V_pure` exactly and `v_pure` by grid search.
///
/// For a fixed pure learner profile `z`, the optimizer strategies under which
/// every learner's action in `z` is a best reply form a polytope (the
/// best-reply conditions are linear in `alpha`), so the optimistic value is
/// the best of one LP per profile.
pub fn pure_stackelberg_values(game: &GameSpec, grid_resolution: f64) -> Result<PureStackelberg> {
    check_game(game)?;
    let optimistic = pure_optimistic_value(game)?;

    let k = game.num_actions(game.optimizer());
    let divisions = check_resolution(grid_resolution)?;
    let has_pure_nash = |a: &Vec<f64>| -> Result<bool> {
        let induced = induce_game(game, &alpha_strategy(game, a)?)?;
        Ok((0..induced.num_profiles()).any(|idx| is_pure_nash(&induced, idx)))
    };
    let covers_grid = simplex_grid(k, divisions)
        .par_iter()
        .map(has_pure_nash)
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .all(|b| b);
    let best = maximize_over_simplex(k, grid_resolution, |a| {
        let alpha = alpha_strategy(game, a)?;
        let induced = induce_game(game, &alpha)?;
        let leader = induced.leader_utility().expect("induced game");
        let mut worst: Option<(f64, usize)> = None;
        for idx in 0..induced.num_profiles() {
            if is_pure_nash(&induced, idx) && worst.map_or(true, |(v, _)| leader[idx] < v) {
                worst = Some((leader[idx], idx));
            }
        }
        Ok(worst.map(|(v, idx)| (v, induced.decode_profile(idx))))
    })?;
    let pessimistic = best
        .map(|b| -> Result<StackelbergValue> {
            Ok(StackelbergValue {
                value: b.value,
                alpha: alpha_strategy(game, &b.alpha)?,
                response: Response::Pure(b.witness),
                method: method_for(game, grid_resolution),
            })
        })
        .transpose()?;
    Ok(PureStackelberg {
        optimistic,
        pessimistic,
        covers_grid,
    })
}

fn pure_optimistic_value(game: &GameSpec) -> Result<Option<StackelbergValue>> {
    let n = game.num_players();
    let opt = game.optimizer();
    let k = game.num_actions(opt);
    let learner_profiles = game.num_profiles() / k;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for l in 0..learner_profiles {
        let base = l * k;
        let mut system = LinearSystem::new(k);
        system.add_equality(vec![1.0; k], 1.0)?;
        for i in 0..n - 1 {
            let u = game.utilities(i);
            let current = game.action_in(base, i);
            for alt in 0..game.num_actions(i) {
                if alt == current {
                    continue;
                }
                let coeffs = (0..k)
                    .map(|a| u[game.deviate(base + a, i, alt)] - u[base + a])
                    .collect();
                system.add_inequality(coeffs, 0.0)?;
            }
        }
        let objective: Vec<f64> = (0..k).map(|a| game.utility_at(opt, base + a)).collect();
        if let LpOutcome::Optimal(sol) = lp_solve(&objective, Direction::Maximize, &system)? {
            if best.as_ref().map_or(true, |(v, _, _)| sol.value > v + VALUE_TIE_TOL) {
                best = Some((sol.value, l, sol.point));
            }
        }
    }
    best.map(|(value, l, point)| {
        let profile = game.decode_profile(l * k)[..n - 1].to_vec();
        Ok(StackelbergValue {
            value,
            alpha: alpha_strategy(game, &point)?,
            response: Response::Pure(profile),
            method: Method::ExactLp,
        })
    })
    .transpose()
}

/// `(V_mixed, v_mixed)`: best and worst Nash equilibrium of the induced
/// game, maximized over the optimizer's simplex.
pub fn mixed_stackelberg_values(
    game: &GameSpec,
    grid_resolution: f64,
) -> Result<(StackelbergValue, StackelbergValue)> {
    check_game(game)?;
    let learners = GameSpec::from_sizes(
        &game.sizes()[..game.num_players() - 1],
        vec![vec![0.0; game.num_profiles() / game.num_actions(game.optimizer())]; game.num_players() - 1],
    )?;
    check_enumeration_size(&learners)?;
    let k = game.num_actions(game.optimizer());
    let method = method_for(game, grid_resolution);

    let search = |pick_max: bool| -> Result<StackelbergValue> {
        let best = maximize_over_simplex(k, grid_resolution, |a| {
            let alpha = alpha_strategy(game, a)?;
            let induced = induce_game(game, &alpha)?;
            let leader = induced.leader_utility().expect("induced game").to_vec();
            let mut chosen: Option<(f64, MixedProfile)> = None;
            for eq in mixed_nash_support_enumeration(&induced)? {
                let v = profile_expectation(&leader, &eq);
                let replace = match &chosen {
                    None => true,
                    Some((c, _)) if pick_max => v > *c + VALUE_TIE_TOL,
                    Some((c, _)) => v < *c - VALUE_TIE_TOL,
                };
                if replace {
                    chosen = Some((v, eq));
                }
            }
            Ok(chosen)
        })?;
        let b = best.ok_or_else(|| {
            crate::Error::Internal("no mixed equilibrium found at any optimizer strategy".into())
        })?;
        Ok(StackelbergValue {
            value: b.value,
            alpha: alpha_strategy(game, &b.alpha)?,
            response: Response::Mixed(b.witness),
            method,
        })
    };
    Ok((search(true)?, search(false)?))
}

fn pessimistic_polytope_value(
    game: &GameSpec,
    grid_resolution: f64,
    kind: SetKind,
) -> Result<StackelbergValue> {
    check_game(game)?;
    let k = game.num_actions(game.optimizer());
    let best = maximize_over_simplex(k, grid_resolution, |a| {
        let alpha = alpha_strategy(game, a)?;
        let induced = induce_game(game, &alpha)?;
        let opt = optimize_leader_utility(&induced, kind, Direction::Minimize)?;
        Ok(Some((opt.value, opt.distribution)))
    })?
    .expect("the inner LP is always feasible");
    Ok(StackelbergValue {
        value: best.value,
        alpha: alpha_strategy(game, &best.alpha)?,
        response: Response::Correlated(best.witness),
        method: method_for(game, grid_resolution),
    })
}

/// `v_corr = max_alpha min_{phi in CED(G_alpha)} u_n(phi, alpha)`.
pub fn correlated_stackelberg_value(game: &GameSpec, grid_resolution: f64) -> Result<StackelbergValue> {
    pessimistic_polytope_value(game, grid_resolution, SetKind::Correlated)
}

/// `v_h = max_alpha min_{phi in H(G_alpha)} u_n(phi, alpha)`.
pub fn hannan_stackelberg_value(game: &GameSpec, grid_resolution: f64) -> Result<StackelbergValue> {
    pessimistic_polytope_value(game, grid_resolution, SetKind::Hannan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainLink {
    pub lower: &'static str,
    pub upper: &'static str,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCheck {
    pub tolerance: f64,
    pub links: Vec<ChainLink>,
}

impl ChainCheck {
    pub fn holds(&self) -> bool {
        self.links.iter().all(|l| l.holds)
    }
}

/// All six values with witnesses and the ordering check.
#[derive(Debug, Clone, PartialEq)]
pub struct StackelbergReport {
    pub pure_optimistic: Option<StackelbergValue>,
    pub pure_pessimistic: Option<StackelbergValue>,
    pub mixed_optimistic: StackelbergValue,
    pub mixed_pessimistic: StackelbergValue,
    pub correlated: StackelbergValue,
    pub hannan: StackelbergValue,
    /// See [`PureStackelberg::covers_grid`].
    pub pure_covers_grid: bool,
    pub grid_resolution: f64,
    pub chain: ChainCheck,
}

impl StackelbergReport {
    /// Checks `v_h <= v_corr <= v_mixed <= V_mixed` and, when both pure values
    /// exist, `v_pure <= V_pure <= V_mixed`, each with slack `-tolerance`.
    ///
    /// `v_mixed <= v_pure` is only checked when every grid point has a pure
    /// equilibrium: elsewhere `v_pure` skips optimizer strategies that
    /// `v_mixed` still maximizes over, and the inequality can fail.
    pub fn check_chain(&self, tolerance: f64) -> ChainCheck {
        let mut links = Vec::new();
        let mut link = |lower: &'static str, lo: f64, upper: &'static str, hi: f64| {
            let slack = hi - lo;
            links.push(ChainLink {
                lower,
                upper,
                slack,
                holds: slack >= -tolerance,
            });
        };
        link("v_h", self.hannan.value, "v_corr", self.correlated.value);
        link("v_corr", self.correlated.value, "v_mixed", self.mixed_pessimistic.value);
        link("v_mixed", self.mixed_pessimistic.value, "V_mixed", self.mixed_optimistic.value);
        if let (Some(pp), Some(po)) = (&self.pure_pessimistic, &self.pure_optimistic) {
            if self.pure_covers_grid {
                link("v_mixed", self.mixed_pessimistic.value, "v_pure", pp.value);
            }
            link("v_pure", pp.value, "V_pure", po.value);
            link("V_pure", po.value, "V_mixed", self.mixed_optimistic.value);
        }
        ChainCheck { tolerance, links }
    }
}

pub fn stackelberg_report(game: &GameSpec, grid_resolution: f64) -> Result<StackelbergReport> {
    let (mixed_optimistic, mixed_pessimistic) = mixed_stackelberg_values(game, grid_resolution)?;
    let pure = pure_stackelberg_values(game, grid_resolution)?;
    let correlated = correlated_stackelberg_value(game, grid_resolution)?;
    let hannan = hannan_stackelberg_value(game, grid_resolution)?;
    let mut report = StackelbergReport {
        pure_optimistic: pure.optimistic,
        pure_pessimistic: pure.pessimistic,
        mixed_optimistic,
        mixed_pessimistic,
        correlated,
        hannan,
        pure_covers_grid: pure.covers_grid,
        grid_resolution,
        chain: ChainCheck {
            tolerance: DEFAULT_CHAIN_TOLERANCE,
            links: Vec::new(),
        },
    };
    report.chain = report.check_chain(DEFAULT_CHAIN_TOLERANCE);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ce1_game, ce2_game};

    const RES: f64 = DEFAULT_GRID_RESOLUTION;

    #[test]
    fn grid_enumerates_the_simplex() {
        assert_eq!(simplex_grid(1, 50), vec![vec![1.0]]);
        assert_eq!(simplex_grid(2, 50).len(), 51);
        assert_eq!(simplex_grid(3, 4).len(), 15);
        for p in simplex_grid(3, 7) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn counterexample_one_values() {
        let pure = pure_stackelberg_values(&ce1_game(), RES).unwrap();
        let vp = pure.optimistic.unwrap();
        assert!((vp.value - 1.0).abs() < 1e-12);
        assert_eq!(vp.response, Response::Pure(vec![1, 1]));
        assert_eq!(vp.method, Method::ExactLp);
        assert!(pure.pessimistic.unwrap().value.abs() < 1e-12);

        let (big, small) = mixed_stackelberg_values(&ce1_game(), RES).unwrap();
        assert!((big.value - 1.0).abs() < 1e-12);
        assert!(small.value.abs() < 1e-12);
        let vc = correlated_stackelberg_value(&ce1_game(), RES).unwrap();
        assert!(vc.value <= small.value + 1e-12);
    }

    #[test]
    fn counterexample_two_values() {
        let g = ce2_game();
        let pure = pure_stackelberg_values(&g, RES).unwrap();
        assert!(pure.optimistic.unwrap().value.abs() < 1e-12);
        let (_, small) = mixed_stackelberg_values(&g, RES).unwrap();
        assert!(small.value.abs() < 1e-12);
        let vc = correlated_stackelberg_value(&g, RES).unwrap();
        assert!((vc.value + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(vc.method, Method::ExactLp);
        let vh = hannan_stackelberg_value(&g, RES).unwrap();
        assert!(vh.value <= vc.value + 1e-12);
    }

    #[test]
    fn constant_optimizer_utility() {
        let mut g = crate::fixtures::random_game(&[2, 2, 3], 3);
        let mut utilities = g.all_utilities().to_vec();
        utilities[2] = vec![0.7; 12];
        g = GameSpec::from_sizes(g.sizes(), utilities).unwrap();
        let vh = hannan_stackelberg_value(&g, RES).unwrap();
        assert!((vh.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn two_player_optimistic_values_agree() {
        for seed in 0..5 {
            let g = crate::fixtures::random_game(&[3, 2], seed);
            let pure = pure_stackelberg_values(&g, RES).unwrap();
            let (big, _) = mixed_stackelberg_values(&g, RES).unwrap();
            let vp = pure.optimistic.unwrap().value;
            assert!((vp - big.value).abs() < 0.02, "seed {seed}: {vp} vs {}", big.value);
        }
    }

    #[test]
    fn report_chain_on_counterexamples() {
        for g in [ce1_game(), ce2_game()] {
            let r = stackelberg_report(&g, RES).unwrap();
            assert!(r.chain.holds(), "{:?}", r.chain);
        }
    }

    #[test]
    fn bad_resolution_is_rejected() {
        assert!(correlated_stackelberg_value(&ce2_game(), 0.0).is_err());
        assert!(correlated_stackelberg_value(&ce2_game(), 2.0).is_err());
    }
}
