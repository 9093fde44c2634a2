//! Finite normal-form games, mixed strategies and the utility extensions used
//! everywhere else in the crate.
//!
//! Pure profiles are stored as flat indices in lexicographic order with the
//! last player's action varying fastest. The last player (`num_players - 1`)
//! is the optimizer; every other player is a learner. Because the optimizer
//! is the fastest-varying coordinate, a full profile index factors as
//! `learner_index * num_optimizer_actions + optimizer_action`.

use std::collections::HashSet;
use std::fmt;

use crate::equilibria::lp::{lp_solve, Direction, LinearSystem, LpOutcome};
use crate::error::{invalid_input, Result};

/// Tolerance on utility comparisons when deciding best replies.
pub const BEST_REPLY_TOL: f64 = 1e-9;

/// Tolerance on the sum of a mixed strategy.
pub const STRATEGY_SUM_TOL: f64 = 1e-12;

/// Tolerance on the sum of a joint distribution.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    action_labels: Vec<Vec<String>>,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    utilities: Vec<Vec<f64>>,
    /// Utility of a committed, non-acting optimizer. Only games produced by
    /// [`induce_game`] carry one.
    leader_utility: Option<Vec<f64>>,
}

impl GameSpec {
    /// Builds a game from per-player action labels and flat utility tensors.
    ///
    /// One-player games are accepted because inducing a two-player game on
    /// the optimizer's strategy leaves a single learner.
    pub fn new(action_labels: Vec<Vec<String>>, utilities: Vec<Vec<f64>>) -> Result<Self> {
        let n = action_labels.len();
        if n == 0 {
            return Err(invalid_input("a game needs at least one player"));
        }
        for (p, labels) in action_labels.iter().enumerate() {
            if labels.is_empty() {
                return Err(invalid_input(format!("player {} has no actions", p + 1)));
            }
            let mut seen = HashSet::new();
            for l in labels {
                if !seen.insert(l.as_str()) {
                    return Err(invalid_input(format!(
                        "player {} has duplicate action label {:?}",
                        p + 1,
                        l
                    )));
                }
            }
        }
        if utilities.len() != n {
            return Err(invalid_input(format!(
                "expected {} utility tensors, got {}",
                n,
                utilities.len()
            )));
        }
        let sizes: Vec<usize> = action_labels.iter().map(Vec::len).collect();
        let num_profiles: usize = sizes.iter().product();
        for (p, u) in utilities.iter().enumerate() {
            if u.len() != num_profiles {
                return Err(invalid_input(format!(
                    "utility tensor of player {} has {} entries, expected {}",
                    p + 1,
                    u.len(),
                    num_profiles
                )));
            }
            if let Some(pos) = u.iter().position(|x| !x.is_finite()) {
                return Err(invalid_input(format!(
                    "utility tensor of player {} has a non-finite entry at position {}",
                    p + 1,
                    pos
                )));
            }
        }
        Ok(Self {
            strides: strides_for(&sizes),
            sizes,
            action_labels,
            utilities,
            leader_utility: None,
        })
    }

    /// Builds a game with generated labels `a1, a2, ...` per player.
    pub fn from_sizes(sizes: &[usize], utilities: Vec<Vec<f64>>) -> Result<Self> {
        let labels = sizes
            .iter()
            .map(|&k| (1..=k).map(|a| format!("a{a}")).collect())
            .collect();
        Self::new(labels, utilities)
    }

    pub fn num_players(&self) -> usize {
        self.sizes.len()
    }

    /// Index of the optimizer, the last player.
    pub fn optimizer(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.sizes[player]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_profiles(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn action_labels(&self, player: usize) -> &[String] {
        &self.action_labels[player]
    }

    pub fn all_action_labels(&self) -> &[Vec<String>] {
        &self.action_labels
    }

    pub fn action_index(&self, player: usize, label: &str) -> Option<usize> {
        self.action_labels[player].iter().position(|l| l == label)
    }

    pub fn utilities(&self, player: usize) -> &[f64] {
        &self.utilities[player]
    }

    pub fn all_utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn leader_utility(&self) -> Option<&[f64]> {
        self.leader_utility.as_deref()
    }

    #[inline]
    pub fn utility_at(&self, player: usize, profile_index: usize) -> f64 {
        self.utilities[player][profile_index]
    }

    pub fn utility(&self, player: usize, profile: &[usize]) -> f64 {
        self.utilities[player][self.profile_index(profile)]
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        debug_assert_eq!(profile.len(), self.sizes.len());
        profile
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn decode_profile(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for p in (0..self.sizes.len()).rev() {
            out[p] = index % self.sizes[p];
            index /= self.sizes[p];
        }
        out
    }

    #[inline]
    pub fn action_in(&self, profile_index: usize, player: usize) -> usize {
        (profile_index / self.strides[player]) % self.sizes[player]
    }

    /// Index of the profile obtained by switching `player` to `action`.
    #[inline]
    pub fn deviate(&self, profile_index: usize, player: usize, action: usize) -> usize {
        let current = self.action_in(profile_index, player);
        profile_index + action * self.strides[player] - current * self.strides[player]
    }

    /// Checks that `profile` is a valid pure profile of this game.
    pub fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.sizes.len() {
            return Err(invalid_input(format!(
                "profile has {} entries, game has {} players",
                profile.len(),
                self.sizes.len()
            )));
        }
        for (p, (&a, &k)) in profile.iter().zip(&self.sizes).enumerate() {
            if a >= k {
                return Err(invalid_input(format!(
                    "action {} out of range for player {} ({} actions)",
                    a,
                    p + 1,
                    k
                )));
            }
        }
        Ok(())
    }

    /// Largest absolute utility entry of `player`.
    pub fn sup_norm(&self, player: usize) -> f64 {
        self.utilities[player]
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `max - min` of the utility tensor of `player`.
    pub fn utility_range(&self, player: usize) -> f64 {
        let u = &self.utilities[player];
        let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Renders a profile with action labels, e.g. `(T,L,E)`.
    pub fn profile_label(&self, profile: &[usize]) -> String {
        let parts: Vec<&str> = profile
            .iter()
            .enumerate()
            .map(|(p, &a)| self.action_labels[p][a].as_str())
            .collect();
        format!("({})", parts.join(","))
    }
}

fn strides_for(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; sizes.len()];
    for p in (0..sizes.len().saturating_sub(1)).rev() {
        strides[p] = strides[p + 1] * sizes[p + 1];
    }
    strides
}

/// Probability vector over one player's actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    player: usize,
    probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(player: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid_input("mixed strategy over an empty action set"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid_input(format!(
                "mixed strategy of player {} has a negative or non-finite entry: {:?}",
                player + 1,
                probs
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STRATEGY_SUM_TOL {
            return Err(invalid_input(format!(
                "mixed strategy of player {} sums to {}, not 1",
                player + 1,
                sum
            )));
        }
        Ok(Self { player, probs })
    }

    /// Clamps small negative entries and renormalizes before validating.
    /// Used for LP and Newton outputs that are correct up to round-off.
    pub fn from_approximate(player: usize, probs: Vec<f64>) -> Result<Self> {
        let clamped: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 || (sum - 1.0).abs() > 1e-6 {
            return Err(invalid_input(format!(
                "approximate strategy of player {} is not a distribution: {:?}",
                player + 1,
                probs
            )));
        }
        Self::new(player, clamped.iter().map(|p| p / sum).collect())
    }

    pub fn pure(player: usize, num_actions: usize, action: usize) -> Self {
        assert!(action < num_actions, "pure action out of range");
        let mut probs = vec![0.0; num_actions];
        probs[action] = 1.0;
        Self { player, probs }
    }

    pub fn uniform(player: usize, num_actions: usize) -> Self {
        assert!(num_actions > 0);
        Self {
            player,
            probs: vec![1.0 / num_actions as f64; num_actions],
        }
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_actions(&self) -> usize {
        self.probs.len()
    }

    /// The action played with certainty, if any.
    pub fn as_pure(&self) -> Option<usize> {
        self.probs.iter().position(|&p| p == 1.0)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&a| self.probs[a] > 0.0).collect()
    }

    pub(crate) fn check_for(&self, game: &GameSpec, player: usize) -> Result<()> {
        if self.player != player {
            return Err(invalid_input(format!(
                "strategy belongs to player {}, expected player {}",
                self.player + 1,
                player + 1
            )));
        }
        if player >= game.num_players() || self.probs.len() != game.num_actions(player) {
            return Err(invalid_input(format!(
                "strategy of player {} has {} entries, game expects {}",
                player + 1,
                self.probs.len(),
                game.num_actions(player.min(game.num_players() - 1))
            )));
        }
        Ok(())
    }
}

impl fmt::Display for MixedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.probs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", crate::format::sig12(*p))?;
        }
        write!(f, "]")
    }
}

/// One mixed strategy per player for a set of distinct players, sorted by
/// player index.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile {
    strategies: Vec<MixedStrategy>,
}

impl MixedProfile {
    pub fn new(mut strategies: Vec<MixedStrategy>) -> Result<Self> {
        strategies.sort_by_key(|s| s.player);
        for w in strategies.windows(2) {
            if w[0].player == w[1].player {
                return Err(invalid_input(format!(
                    "player {} appears twice in a mixed profile",
                    w[0].player + 1
                )));
            }
        }
        Ok(Self { strategies })
    }

    /// Degenerate profile playing `profile` with certainty.
    pub fn pure(game: &GameSpec, profile: &[usize]) -> Self {
        Self {
            strategies: profile
                .iter()
                .enumerate()
                .map(|(p, &a)| MixedStrategy::pure(p, game.num_actions(p), a))
                .collect(),
        }
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.strategies
    }

    pub fn strategy_for(&self, player: usize) -> Option<&MixedStrategy> {
        self.strategies.iter().find(|s| s.player == player)
    }

    pub fn players(&self) -> Vec<usize> {
        self.strategies.iter().map(|s| s.player).collect()
    }

    /// Returns the profile with `s` added, or replacing the entry of the same player.
    pub fn with(&self, s: MixedStrategy) -> Self {
        let mut strategies: Vec<MixedStrategy> = self
            .strategies
            .iter()
            .filter(|x| x.player != s.player)
            .cloned()
            .collect();
        strategies.push(s);
        strategies.sort_by_key(|s| s.player);
        Self { strategies }
    }

    /// Checks that the profile covers exactly the players in `expected`.
    fn check_players(&self, game: &GameSpec, expected: &[usize]) -> Result<()> {
        if self.players() != expected {
            return Err(invalid_input(format!(
                "profile covers players {:?}, expected {:?}",
                self.players().iter().map(|p| p + 1).collect::<Vec<_>>(),
                expected.iter().map(|p| p + 1).collect::<Vec<_>>()
            )));
        }
        for s in &self.strategies {
            s.check_for(game, s.player)?;
        }
        Ok(())
    }
}

/// Probability distribution over the joint actions of an ordered subset of
/// players (its scope). Entries follow the same lexicographic convention as
/// [`GameSpec`], restricted to the scope.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    scope: Vec<usize>,
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(scope: Vec<usize>, sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if scope.len() != sizes.len() {
            return Err(invalid_input("scope and sizes differ in length"));
        }
        let expected: usize = sizes.iter().product();
        if probs.len() != expected {
            return Err(invalid_input(format!(
                "joint distribution has {} entries, expected {}",
                probs.len(),
                expected
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid_input("joint distribution has a negative entry"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(invalid_input(format!(
                "joint distribution sums to {sum}, not 1"
            )));
        }
        Ok(Self {
            scope,
            sizes,
            probs,
        })
    }

    /// Clamps round-off negatives from LP output and renormalizes.
    pub(crate) fn from_approximate(
        scope: Vec<usize>,
        sizes: Vec<usize>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let clamped: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(crate::error::Error::Internal(format!(
                "LP returned a distribution summing to {sum}"
            )));
        }
        Self::new(scope, sizes, clamped.iter().map(|p| p / sum).collect())
    }

    /// Distribution over the learners (all players but the optimizer) of `game`.
    pub fn over_learners(game: &GameSpec, probs: Vec<f64>) -> Result<Self> {
        let n = game.num_players();
        Self::new(
            (0..n - 1).collect(),
            game.sizes()[..n - 1].to_vec(),
            probs,
        )
    }

    /// Distribution over all players of `game`.
    pub fn over_players(game: &GameSpec, probs: Vec<f64>) -> Result<Self> {
        Self::new(
            (0..game.num_players()).collect(),
            game.sizes().to_vec(),
            probs,
        )
    }

    pub fn point_mass(scope: Vec<usize>, sizes: Vec<usize>, index: usize) -> Self {
        let mut probs = vec![0.0; sizes.iter().product()];
        probs[index] = 1.0;
        Self {
            scope,
            sizes,
            probs,
        }
    }

    /// Product distribution of independent mixed strategies, in the given order.
    pub fn product(strategies: &[MixedStrategy]) -> Self {
        let scope = strategies.iter().map(|s| s.player()).collect();
        let sizes = strategies.iter().map(|s| s.num_actions()).collect();
        let probs = product_weights(strategies.iter().map(|s| s.probs()));
        Self {
            scope,
            sizes,
            probs,
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Sum of absolute differences to another distribution on the same space.
    pub fn l1_distance(&self, other: &JointDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Kronecker product of probability vectors in lexicographic order (last
/// vector fastest).
pub(crate) fn product_weights<'a>(vectors: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut out = vec![1.0];
    for v in vectors {
        let mut next = Vec::with_capacity(out.len() * v.len());
        for &w in &out {
            for &p in v {
                next.push(w * p);
            }
        }
        out = next;
    }
    out
}

/// Multilinear extension of `player`'s utility to a full mixed profile.
pub fn expected_utility(game: &GameSpec, profile: &MixedProfile, player: usize) -> Result<f64> {
    let all: Vec<usize> = (0..game.num_players()).collect();
    profile.check_players(game, &all)?;
    if player >= game.num_players() {
        return Err(invalid_input(format!("no player {}", player + 1)));
    }
    let weights = product_weights(profile.strategies().iter().map(|s| s.probs()));
    Ok(weights
        .iter()
        .zip(game.utilities(player))
        .map(|(w, u)| w * u)
        .sum())
}

/// `u_player(learner_dist, alpha)`: learners play the joint distribution,
/// the optimizer independently plays `alpha`.
pub fn expected_utility_joint(
    game: &GameSpec,
    learner_dist: &JointDistribution,
    alpha: &MixedStrategy,
    player: usize,
) -> Result<f64> {
    let n = game.num_players();
    let learners: Vec<usize> = (0..n - 1).collect();
    if learner_dist.scope() != learners.as_slice() || learner_dist.sizes() != &game.sizes()[..n - 1]
    {
        return Err(invalid_input(
            "learner distribution must range over players 1..n-1 of the game",
        ));
    }
    alpha.check_for(game, n - 1)?;
    if player >= n {
        return Err(invalid_input(format!("no player {}", player + 1)));
    }
    let k = game.num_actions(n - 1);
    let u = game.utilities(player);
    let mut total = 0.0;
    for (l, &d) in learner_dist.probs().iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let inner: f64 = alpha
            .probs()
            .iter()
            .enumerate()
            .map(|(a, &p)| p * u[l * k + a])
            .sum();
        total += d * inner;
    }
    Ok(total)
}

/// Expected utility of each pure action of `player` against `others`.
pub fn action_values(game: &GameSpec, player: usize, others: &MixedProfile) -> Result<Vec<f64>> {
    if player >= game.num_players() {
        return Err(invalid_input(format!("no player {}", player + 1)));
    }
    let expected: Vec<usize> = (0..game.num_players()).filter(|&p| p != player).collect();
    others.check_players(game, &expected)?;
    let mut values = vec![0.0; game.num_actions(player)];
    let u = game.utilities(player);
    for (idx, &payoff) in u.iter().enumerate() {
        let mut w = 1.0;
        for s in others.strategies() {
            w *= s.probs()[game.action_in(idx, s.player())];
            if w == 0.0 {
                break;
            }
        }
        if w != 0.0 {
            values[game.action_in(idx, player)] += w * payoff;
        }
    }
    Ok(values)
}

/// Pure actions of `player` that are best replies to `others`, within
/// [`BEST_REPLY_TOL`]. A mixed strategy is a best reply exactly when its
/// support lies inside this set.
pub fn best_reply_set(game: &GameSpec, player: usize, others: &MixedProfile) -> Result<Vec<usize>> {
    let values = action_values(game, player, others)?;
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..values.len())
        .filter(|&a| values[a] >= best - BEST_REPLY_TOL)
        .collect())
}

/// Whether some mixture of `player`'s other actions does at least as well as
/// `action` against every pure opponent profile.
pub fn is_very_weakly_dominated(game: &GameSpec, player: usize, action: usize) -> Result<bool> {
    if player >= game.num_players() || action >= game.num_actions(player) {
        return Err(invalid_input("player or action out of range"));
    }
    let k = game.num_actions(player);
    if k < 2 {
        return Ok(false);
    }
    let others: Vec<usize> = (0..k).filter(|&b| b != action).collect();
    let mut system = LinearSystem::new(others.len());
    system.add_equality(vec![1.0; others.len()], 1.0)?;
    let u = game.utilities(player);
    for idx in 0..game.num_profiles() {
        if game.action_in(idx, player) != action {
            continue;
        }
        let coeffs: Vec<f64> = others
            .iter()
            .map(|&b| -u[game.deviate(idx, player, b)])
            .collect();
        system.add_inequality(coeffs, -u[idx])?;
    }
    let zero = vec![0.0; others.len()];
    Ok(matches!(
        lp_solve(&zero, Direction::Maximize, &system)?,
        LpOutcome::Optimal(_)
    ))
}

/// The learners' game obtained when the optimizer commits to `alpha`:
/// every learner's utility, and the optimizer's own (kept as the leader
/// utility), is averaged over `alpha`.
pub fn induce_game(game: &GameSpec, alpha: &MixedStrategy) -> Result<GameSpec> {
    let n = game.num_players();
    if n < 2 {
        return Err(invalid_input("cannot induce a game with no learners"));
    }
    alpha.check_for(game, n - 1)?;
    let k = game.num_actions(n - 1);
    let learner_profiles = game.num_profiles() / k;
    let average = |u: &[f64]| -> Vec<f64> {
        (0..learner_profiles)
            .map(|l| {
                alpha
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(a, &p)| p * u[l * k + a])
                    .sum()
            })
            .collect()
    };
    let utilities = (0..n - 1).map(|p| average(game.utilities(p))).collect();
    let mut induced = GameSpec::new(game.all_action_labels()[..n - 1].to_vec(), utilities)?;
    induced.leader_utility = Some(average(game.utilities(n - 1)));
    Ok(induced)
}
