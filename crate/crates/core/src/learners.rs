//! No-regret learners and regret bookkeeping.
//!
//! Regret states keep running averages normalized by the round count:
//!
//! - internal: `r[a][b] = (1/t) * sum over rounds s <= t with a_i^s = a of
//!   (u_i(b, a_-i^s) - u_i(a, a_-i^s))`
//! - external: `R[a] = (1/t) * sum over rounds of (u_i(a, a_-i^s) - u_i(a^s))`
//!
//! Learners observe full realized profiles, the optimizer's action included.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::fixtures::{ce1_game, ce2_game};
use crate::game::{GameSpec, MixedStrategy};

/// Regrets at or below this are treated as non-positive by the decision
/// rules, so round-off in the running averages cannot flip a tie.
pub const POSITIVE_PART_TOL: f64 = 1e-12;

#[inline]
fn positive_part(x: f64) -> f64 {
    if x > POSITIVE_PART_TOL {
        x
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalRegretState {
    player: usize,
    num_actions: usize,
    t: u64,
    /// Row-major `num_actions x num_actions`, diagonal identically zero.
    regret: Vec<f64>,
    utility_range: f64,
}

impl InternalRegretState {
    pub fn new(game: &GameSpec, player: usize) -> Self {
        let k = game.num_actions(player);
        Self {
            player,
            num_actions: k,
            t: 0,
            regret: vec![0.0; k * k],
            utility_range: game.utility_range(player),
        }
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn utility_range(&self) -> f64 {
        self.utility_range
    }

    /// Average regret for having played `a` instead of `b`.
    pub fn regret(&self, a: usize, b: usize) -> f64 {
        self.regret[a * self.num_actions + b]
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.regret
            .chunks(self.num_actions)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `max_{a,b} r[a][b]`, which is at least 0 because of the diagonal.
    pub fn max_regret(&self) -> f64 {
        self.regret.iter().cloned().fold(0.0, f64::max)
    }

    /// Folds one realized profile into the running averages.
    pub fn update(&mut self, game: &GameSpec, profile: &[usize]) -> Result<()> {
        game.check_profile(profile)?;
        let idx = game.profile_index(profile);
        let played = profile[self.player];
        let u = game.utilities(self.player);
        let t = self.t as f64;
        let k = self.num_actions;
        for a in 0..k {
            let row = &mut self.regret[a * k..(a + 1) * k];
            if a == played {
                for (b, r) in row.iter_mut().enumerate() {
                    let gain = u[game.deviate(idx, self.player, b)] - u[idx];
                    *r = (t * *r + gain) / (t + 1.0);
                }
            } else {
                for r in row.iter_mut() {
                    *r *= t / (t + 1.0);
                }
            }
        }
        self.t += 1;
        Ok(())
    }
}

/// Functional form of [`InternalRegretState::update`].
pub fn update_internal_regret(
    mut state: InternalRegretState,
    game: &GameSpec,
    realized_profile: &[usize],
) -> Result<InternalRegretState> {
    state.update(game, realized_profile)?;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalRegretState {
    player: usize,
    t: u64,
    regret: Vec<f64>,
}

impl ExternalRegretState {
    pub fn new(game: &GameSpec, player: usize) -> Self {
        Self {
            player,
            t: 0,
            regret: vec![0.0; game.num_actions(player)],
        }
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn regret_vector(&self) -> &[f64] {
        &self.regret
    }

    pub fn update(&mut self, game: &GameSpec, profile: &[usize]) -> Result<()> {
        game.check_profile(profile)?;
        let idx = game.profile_index(profile);
        let u = game.utilities(self.player);
        let t = self.t as f64;
        for (a, r) in self.regret.iter_mut().enumerate() {
            let gain = u[game.deviate(idx, self.player, a)] - u[idx];
            *r = (t * *r + gain) / (t + 1.0);
        }
        self.t += 1;
        Ok(())
    }
}

/// How a learner picks its strategy when its regret rule leaves the choice
/// open (every relevant positive part is zero).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TieBreak {
    AlwaysFirst,
    AlwaysSecond,
    Uniform,
    /// Repeat the learner's own previous action; uniform in round 1.
    RepeatPrevious,
    /// Play the action mapped to the previous learner profile, or
    /// `otherwise` when no rule matches or in round 1.
    ByPreviousProfile {
        rules: Vec<(Vec<usize>, usize)>,
        otherwise: usize,
    },
}

impl TieBreak {
    /// Strategy for `player` with `k` actions given the previous full profile.
    pub fn resolve(&self, player: usize, k: usize, previous: Option<&[usize]>) -> Result<MixedStrategy> {
        let pure = |a: usize| -> Result<MixedStrategy> {
            if a >= k {
                return Err(invalid_config(format!(
                    "tie-break picks action {} but player {} has {} actions",
                    a + 1,
                    player + 1,
                    k
                )));
            }
            Ok(MixedStrategy::pure(player, k, a))
        };
        match self {
            TieBreak::AlwaysFirst => pure(0),
            TieBreak::AlwaysSecond => pure(1),
            TieBreak::Uniform => Ok(MixedStrategy::uniform(player, k)),
            TieBreak::RepeatPrevious => match previous {
                Some(p) => pure(p[player]),
                None => Ok(MixedStrategy::uniform(player, k)),
            },
            TieBreak::ByPreviousProfile { rules, otherwise } => {
                let chosen = previous
                    .and_then(|p| {
                        rules
                            .iter()
                            .find(|(key, _)| p.len() >= key.len() && p[..key.len()] == key[..])
                            .map(|(_, a)| *a)
                    })
                    .unwrap_or(*otherwise);
                pure(chosen)
            }
        }
    }
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieBreak::AlwaysFirst => f.write_str("always-first"),
            TieBreak::AlwaysSecond => f.write_str("always-second"),
            TieBreak::Uniform => f.write_str("uniform"),
            TieBreak::RepeatPrevious => f.write_str("repeat-previous"),
            TieBreak::ByPreviousProfile { .. } => f.write_str("by-previous-profile"),
        }
    }
}

impl FromStr for TieBreak {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always-first" => Ok(TieBreak::AlwaysFirst),
            "always-second" => Ok(TieBreak::AlwaysSecond),
            "uniform" => Ok(TieBreak::Uniform),
            "repeat-previous" => Ok(TieBreak::RepeatPrevious),
            _ => Err(invalid_config(format!(
                "unknown tie_break {s:?} (expected always-first, always-second, uniform or repeat-previous)"
            ))),
        }
    }
}

/// Two-action regret matching: play the first action with the probability
/// `p` solving `p * (r[0][1])+ = (1 - p) * (r[1][0])+`; `tie_break` decides
/// when both positive parts vanish and the equation holds for every `p`.
pub fn next_strategy_regret_matching_2action(
    state: &InternalRegretState,
    tie_break: &TieBreak,
    previous: Option<&[usize]>,
) -> Result<MixedStrategy> {
    if state.num_actions != 2 {
        return Err(invalid_input(format!(
            "two-action regret matching called for player {} with {} actions",
            state.player + 1,
            state.num_actions
        )));
    }
    let leave_first = positive_part(state.regret(0, 1));
    let leave_second = positive_part(state.regret(1, 0));
    if leave_first == 0.0 && leave_second == 0.0 {
        return tie_break.resolve(state.player, 2, previous);
    }
    let p = leave_second / (leave_first + leave_second);
    MixedStrategy::new(state.player, vec![p, 1.0 - p])
}

/// Regret matching with inertia for any number of actions: switch from
/// `last_action` to `b` with probability `(r[last][b])+ / mu`, otherwise stay.
///
/// Requires `mu > (k - 1) * utility_range` so that the switching mass never
/// exceeds one.
pub fn next_strategy_internal_regret_matching(
    state: &InternalRegretState,
    last_action: usize,
    mu: f64,
) -> Result<MixedStrategy> {
    let k = state.num_actions;
    if state.t == 0 {
        return Err(invalid_input(
            "internal regret matching needs at least one observed round",
        ));
    }
    if last_action >= k {
        return Err(invalid_input("last action out of range"));
    }
    check_inertia(mu, k, state.utility_range)?;
    let mut probs = vec![0.0; k];
    let mut switched = 0.0;
    for (b, p) in probs.iter_mut().enumerate() {
        if b != last_action {
            *p = positive_part(state.regret(last_action, b)) / mu;
            switched += *p;
        }
    }
    probs[last_action] = 1.0 - switched;
    MixedStrategy::new(state.player, probs)
}

fn check_inertia(mu: f64, k: usize, range: f64) -> Result<()> {
    let floor = (k as f64 - 1.0) * range;
    if !(mu.is_finite() && mu > floor && mu > 0.0) {
        return Err(invalid_config(format!(
            "inertia mu = {mu} must exceed (k - 1) * utility range = {floor}"
        )));
    }
    Ok(())
}

/// Default inertia `2 (k - 1) (max u - min u)`, or 1 for a constant utility.
pub fn default_inertia(k: usize, utility_range: f64) -> f64 {
    let mu = 2.0 * (k as f64 - 1.0) * utility_range;
    if mu > 0.0 {
        mu
    } else {
        1.0
    }
}

/// Plays actions with probabilities proportional to positive external regrets.
pub fn next_strategy_external_regret_matching(
    state: &ExternalRegretState,
    tie_break: &TieBreak,
    previous: Option<&[usize]>,
) -> Result<MixedStrategy> {
    let positives: Vec<f64> = state.regret.iter().map(|&r| positive_part(r)).collect();
    let total: f64 = positives.iter().sum();
    if total == 0.0 {
        return tie_break.resolve(state.player, state.regret.len(), previous);
    }
    MixedStrategy::from_approximate(state.player, positives.iter().map(|p| p / total).collect())
}

fn scripted_shape(player: usize, state: &InternalRegretState) -> Result<()> {
    if player > 1 || state.player != player || state.num_actions != 2 {
        return Err(invalid_config(
            "scripted learners are players 1 and 2 of a counterexample game, with two actions each",
        ));
    }
    Ok(())
}

fn as_pure(s: MixedStrategy) -> Result<usize> {
    s.as_pure().ok_or_else(|| {
        invalid_config(format!(
            "scripted learner reached a non-deterministic regret state: {s}"
        ))
    })
}

/// Tie-break of the first counterexample: always the first action.
pub fn ce1_tie_break() -> TieBreak {
    TieBreak::AlwaysFirst
}

/// Profile-dependent tie-breaks of the second counterexample, with actions
/// `T=0, B=1` for player 1 and `L=0, R=1` for player 2.
pub fn ce2_tie_break(player: usize) -> TieBreak {
    const T: usize = 0;
    const B: usize = 1;
    const L: usize = 0;
    const R: usize = 1;
    let rules = if player == 0 {
        vec![(vec![B, L], T), (vec![T, L], B), (vec![B, R], B)]
    } else {
        vec![(vec![B, R], L), (vec![B, L], L), (vec![T, L], R)]
    };
    TieBreak::ByPreviousProfile {
        rules,
        otherwise: 0,
    }
}

/// Next action of a learner of the first counterexample: two-action regret
/// matching that starts on its first action and resolves ties toward it.
pub fn scripted_ce1_step(player: usize, state: &InternalRegretState) -> Result<usize> {
    scripted_shape(player, state)?;
    as_pure(next_strategy_regret_matching_2action(state, &ce1_tie_break(), None)?)
}

/// Next action of a learner of the second counterexample: two-action regret
/// matching with ties resolved by the previous learner profile.
pub fn scripted_ce2_step(
    player: usize,
    state: &InternalRegretState,
    previous_profile: Option<&[usize]>,
) -> Result<usize> {
    scripted_shape(player, state)?;
    as_pure(next_strategy_regret_matching_2action(
        state,
        &ce2_tie_break(player),
        previous_profile,
    )?)
}

/// Regret sums accumulated over a play history.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTally {
    player: usize,
    num_actions: usize,
    t: u64,
    external: Vec<f64>,
    internal: Vec<f64>,
}

impl RegretTally {
    pub fn new(game: &GameSpec, player: usize) -> Self {
        let k = game.num_actions(player);
        Self {
            player,
            num_actions: k,
            t: 0,
            external: vec![0.0; k],
            internal: vec![0.0; k * k],
        }
    }

    pub fn record(&mut self, game: &GameSpec, profile_index: usize) {
        let u = game.utilities(self.player);
        let played = game.action_in(profile_index, self.player);
        let k = self.num_actions;
        for b in 0..k {
            let gain = u[game.deviate(profile_index, self.player, b)] - u[profile_index];
            self.external[b] += gain;
            self.internal[played * k + b] += gain;
        }
        self.t += 1;
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `(max_a R[a])+`.
    pub fn external(&self) -> f64 {
        let t = self.t as f64;
        self.external
            .iter()
            .fold(0.0_f64, |m, s| m.max(s / t))
    }

    /// `max_{a,b} r[a][b]` (nonnegative through the diagonal).
    pub fn internal(&self) -> f64 {
        let t = self.t as f64;
        self.internal
            .iter()
            .fold(0.0_f64, |m, s| m.max(s / t))
    }

    /// Average regret for `a -> b`.
    pub fn pairwise(&self, a: usize, b: usize) -> f64 {
        self.internal[a * self.num_actions + b] / self.t as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretMeasure {
    pub external: f64,
    pub internal: f64,
}

/// External and internal regret of `player` over a realized history.
pub fn measure_regrets(game: &GameSpec, history: &[Vec<usize>], player: usize) -> Result<RegretMeasure> {
    if history.is_empty() {
        return Err(invalid_input("regrets of an empty history are undefined"));
    }
    if player >= game.num_players() {
        return Err(invalid_input(format!("no player {}", player + 1)));
    }
    let mut tally = RegretTally::new(game, player);
    for profile in history {
        game.check_profile(profile)?;
        tally.record(game, game.profile_index(profile));
    }
    Ok(RegretMeasure {
        external: tally.external(),
        internal: tally.internal(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    InternalRegretMatching,
    ExternalRegretMatching,
    ScriptedCe1,
    ScriptedCe2,
}

impl LearnerKind {
    pub fn is_scripted(self) -> bool {
        matches!(self, LearnerKind::ScriptedCe1 | LearnerKind::ScriptedCe2)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::InternalRegretMatching => "internal-regret-matching",
            LearnerKind::ExternalRegretMatching => "external-regret-matching",
            LearnerKind::ScriptedCe1 => "scripted-ce1",
            LearnerKind::ScriptedCe2 => "scripted-ce2",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "internal-regret-matching" => Ok(LearnerKind::InternalRegretMatching),
            "external-regret-matching" => Ok(LearnerKind::ExternalRegretMatching),
            "scripted-ce1" => Ok(LearnerKind::ScriptedCe1),
            "scripted-ce2" => Ok(LearnerKind::ScriptedCe2),
            _ => Err(invalid_config(format!("unknown learner kind {s:?}"))),
        }
    }
}

/// Learner configuration, independent of any game or run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub tie_break: Option<TieBreak>,
    pub mu: Option<f64>,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self {
            kind,
            tie_break: None,
            mu: None,
        }
    }

    /// Fresh learner state for `player` of `game`.
    pub fn instantiate(&self, game: &GameSpec, player: usize) -> Result<LearnerPolicy> {
        LearnerPolicy::new(self, game, player)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum RegretState {
    Internal(InternalRegretState),
    External(ExternalRegretState),
}

/// A learner bound to one player of one game, with its regret state.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerPolicy {
    kind: LearnerKind,
    player: usize,
    num_actions: usize,
    tie_break: TieBreak,
    /// Inertia of the switching rule; `None` selects the two-action rule.
    mu: Option<f64>,
    state: RegretState,
    last_action: Option<usize>,
}

impl LearnerPolicy {
    pub fn new(spec: &LearnerSpec, game: &GameSpec, player: usize) -> Result<Self> {
        if game.num_players() < 2 || player >= game.num_players() - 1 {
            return Err(invalid_config(format!(
                "player {} is not a learner of a {}-player game",
                player + 1,
                game.num_players()
            )));
        }
        let k = game.num_actions(player);
        let range = game.utility_range(player);
        if spec.kind.is_scripted() {
            let fixture = match spec.kind {
                LearnerKind::ScriptedCe1 => ce1_game(),
                _ => ce2_game(),
            };
            if game.sizes() != fixture.sizes() || game.all_utilities() != fixture.all_utilities() {
                return Err(invalid_config(format!(
                    "{} learners only play the built-in game of their counterexample",
                    spec.kind
                )));
            }
            if spec.tie_break.is_some() || spec.mu.is_some() {
                return Err(invalid_config(format!(
                    "{} learners use built-in tie-breaks and take no tie_break or mu",
                    spec.kind
                )));
            }
        }
        if spec.mu.is_some() && spec.kind != LearnerKind::InternalRegretMatching {
            return Err(invalid_config(
                "mu only applies to internal-regret-matching learners",
            ));
        }
        let tie_break = match spec.kind {
            LearnerKind::ScriptedCe1 => ce1_tie_break(),
            LearnerKind::ScriptedCe2 => ce2_tie_break(player),
            _ => spec.tie_break.clone().unwrap_or(TieBreak::RepeatPrevious),
        };
        if tie_break == TieBreak::AlwaysSecond && k < 2 {
            return Err(invalid_config(format!(
                "tie_break always-second needs two actions; player {} has one",
                player + 1
            )));
        }
        // two actions without an explicit mu: the two-action rule, which has
        // no inertia; otherwise stay-or-switch with inertia mu
        let mu = match (spec.kind, spec.mu) {
            (LearnerKind::InternalRegretMatching, Some(mu)) => {
                check_inertia(mu, k, range)?;
                Some(mu)
            }
            (LearnerKind::InternalRegretMatching, None) if k != 2 => Some(default_inertia(k, range)),
            _ => None,
        };
        let state = match spec.kind {
            LearnerKind::ExternalRegretMatching => {
                RegretState::External(ExternalRegretState::new(game, player))
            }
            _ => RegretState::Internal(InternalRegretState::new(game, player)),
        };
        Ok(Self {
            kind: spec.kind,
            player,
            num_actions: k,
            tie_break,
            mu,
            state,
            last_action: None,
        })
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn internal_state(&self) -> Option<&InternalRegretState> {
        match &self.state {
            RegretState::Internal(s) => Some(s),
            RegretState::External(_) => None,
        }
    }

    pub fn external_state(&self) -> Option<&ExternalRegretState> {
        match &self.state {
            RegretState::External(s) => Some(s),
            RegretState::Internal(_) => None,
        }
    }

    /// Short description recorded with trajectories.
    pub fn describe(&self) -> String {
        match self.kind {
            LearnerKind::InternalRegretMatching => match self.mu {
                Some(mu) => format!(
                    "{}(tie_break={}, mu={})",
                    self.kind,
                    self.tie_break,
                    crate::format::sig12(mu)
                ),
                None => format!("{}(tie_break={}, two-action)", self.kind, self.tie_break),
            },
            LearnerKind::ExternalRegretMatching => {
                format!("{}(tie_break={})", self.kind, self.tie_break)
            }
            _ => self.kind.to_string(),
        }
    }

    /// Strategy for the coming round. `previous` is the last realized full
    /// profile, `None` in round 1.
    pub fn strategy(&self, previous: Option<&[usize]>) -> Result<MixedStrategy> {
        match (&self.state, self.kind) {
            (RegretState::Internal(s), LearnerKind::InternalRegretMatching) => {
                match (self.last_action, self.mu) {
                    (None, _) => self.tie_break.resolve(self.player, self.num_actions, previous),
                    (Some(last), Some(mu)) => next_strategy_internal_regret_matching(s, last, mu),
                    (Some(_), None) => {
                        next_strategy_regret_matching_2action(s, &self.tie_break, previous)
                    }
                }
            }
            (RegretState::External(s), _) => {
                next_strategy_external_regret_matching(s, &self.tie_break, previous)
            }
            (RegretState::Internal(s), LearnerKind::ScriptedCe1) => {
                let a = scripted_ce1_step(self.player, s)?;
                Ok(MixedStrategy::pure(self.player, 2, a))
            }
            (RegretState::Internal(s), _) => {
                let a = scripted_ce2_step(self.player, s, previous)?;
                Ok(MixedStrategy::pure(self.player, 2, a))
            }
        }
    }

    pub fn observe(&mut self, game: &GameSpec, profile: &[usize]) -> Result<()> {
        match &mut self.state {
            RegretState::Internal(s) => s.update(game, profile)?,
            RegretState::External(s) => s.update(game, profile)?,
        }
        self.last_action = Some(profile[self.player]);
        Ok(())
    }
}
