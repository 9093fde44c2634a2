//! Seeded repeated play between one optimizer and the learners, plus the
//! metrics computed from a realized history.
//!
//! Every player samples from its own ChaCha stream: the master seed picks
//! the key and the player index picks the stream, and each player draws
//! exactly one number per round whatever its strategy. Adding or removing
//! metrics therefore never changes the sampled profiles.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::equilibria::polytope::{l1_projection, SetKind};
use crate::equilibria::stackelberg::{correlated_stackelberg_value, hannan_stackelberg_value, Method};
use crate::error::{invalid_config, invalid_input, Result};
use crate::format::sig12;
use crate::game::{induce_game, GameSpec, JointDistribution, MixedStrategy};
use crate::learners::{LearnerKind, LearnerPolicy, LearnerSpec, RegretTally};

/// What the optimizer plays each round.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerPolicy {
    /// Samples the same mixed strategy every round.
    FixedMixed(MixedStrategy),
    /// Cycles through a fixed list of actions.
    Scripted(Vec<usize>),
}

impl OptimizerPolicy {
    fn check(&self, game: &GameSpec) -> Result<()> {
        let n = game.optimizer();
        let k = game.num_actions(n);
        match self {
            OptimizerPolicy::FixedMixed(alpha) => {
                if alpha.player() != n || alpha.num_actions() != k {
                    return Err(invalid_config(format!(
                        "optimizer strategy must be over the {k} actions of player {}",
                        n + 1
                    )));
                }
            }
            OptimizerPolicy::Scripted(seq) => {
                if seq.is_empty() {
                    return Err(invalid_config("scripted optimizer sequence is empty"));
                }
                if let Some(a) = seq.iter().find(|&&a| a >= k) {
                    return Err(invalid_config(format!(
                        "scripted optimizer action {} is out of range (player {} has {k})",
                        a + 1,
                        n + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            OptimizerPolicy::FixedMixed(alpha) => format!("fixed-mixed{alpha}"),
            OptimizerPolicy::Scripted(seq) => {
                let items: Vec<String> = seq.iter().map(|a| (a + 1).to_string()).collect();
                format!("scripted[{}]", items.join(","))
            }
        }
    }
}

/// A realized play history.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    game: GameSpec,
    seed: u64,
    /// Flat profile index per round.
    profiles: Vec<usize>,
    optimizer: OptimizerPolicy,
    descriptors: Vec<String>,
}

impl Trajectory {
    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> usize {
        self.profiles.len()
    }

    pub fn profile_indices(&self) -> &[usize] {
        &self.profiles
    }

    /// Profile of round `t`, 1-based.
    pub fn profile(&self, t: usize) -> Vec<usize> {
        self.game.decode_profile(self.profiles[t - 1])
    }

    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.profiles.iter().map(|&i| self.game.decode_profile(i))
    }

    pub fn optimizer(&self) -> &OptimizerPolicy {
        &self.optimizer
    }

    /// One entry per player: learners first, optimizer last.
    pub fn descriptors(&self) -> &[String] {
        &self.descriptors
    }

    /// `(1/t) sum_{s <= t} u_n(a^s)`.
    pub fn average_optimizer_payoff(&self, t: usize) -> f64 {
        let u = self.game.utilities(self.game.optimizer());
        let total: f64 = self.profiles[..t].iter().map(|&i| u[i]).sum();
        total / t as f64
    }

    /// CSV with header `t,p1,...,pn` and action labels in the cells.
    pub fn to_csv(&self) -> String {
        let n = self.game.num_players();
        let mut out = String::from("t");
        for i in 0..n {
            write!(out, ",p{}", i + 1).unwrap();
        }
        out.push('\n');
        for (t, &idx) in self.profiles.iter().enumerate() {
            write!(out, "{}", t + 1).unwrap();
            for (i, a) in self.game.decode_profile(idx).into_iter().enumerate() {
                write!(out, ",{}", self.game.action_labels(i)[a]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn player_rng(seed: u64, player: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(player as u64);
    rng
}

fn sample(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // round-off left `u` past the total mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Plays `rounds` rounds of `game`. `learners[i]` controls player `i`.
pub fn run(
    game: &GameSpec,
    optimizer: &OptimizerPolicy,
    mut learners: Vec<LearnerPolicy>,
    rounds: usize,
    seed: u64,
) -> Result<Trajectory> {
    let n = game.num_players();
    if n < 2 {
        return Err(invalid_config("a repeated game needs at least one learner"));
    }
    if rounds == 0 {
        return Err(invalid_config("the number of rounds must be at least 1"));
    }
    if learners.len() != n - 1 {
        return Err(invalid_config(format!(
            "game has {} learners but {} learner policies were given",
            n - 1,
            learners.len()
        )));
    }
    for (i, l) in learners.iter().enumerate() {
        if l.player() != i {
            return Err(invalid_config(format!(
                "learner policy for player {} is bound to player {}",
                i + 1,
                l.player() + 1
            )));
        }
    }
    optimizer.check(game)?;

    let mut descriptors: Vec<String> = learners.iter().map(LearnerPolicy::describe).collect();
    descriptors.push(optimizer.describe());
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| player_rng(seed, i)).collect();
    let mut profiles = Vec::with_capacity(rounds);
    let mut previous: Option<Vec<usize>> = None;
    let mut current = vec![0; n];
    for t in 0..rounds {
        for (i, learner) in learners.iter().enumerate() {
            let s = learner.strategy(previous.as_deref())?;
            current[i] = sample(s.probs(), rngs[i].gen::<f64>());
        }
        let draw = rngs[n - 1].gen::<f64>();
        current[n - 1] = match optimizer {
            OptimizerPolicy::FixedMixed(alpha) => sample(alpha.probs(), draw),
            OptimizerPolicy::Scripted(seq) => seq[t % seq.len()],
        };
        for learner in learners.iter_mut() {
            learner.observe(game, &current)?;
        }
        profiles.push(game.profile_index(&current));
        match previous.as_mut() {
            Some(p) => p.copy_from_slice(&current),
            None => previous = Some(current.clone()),
        }
    }
    Ok(Trajectory {
        game: game.clone(),
        seed,
        profiles,
        optimizer: optimizer.clone(),
        descriptors,
    })
}

/// Instantiates the learner specs for every learner of `game`.
pub fn instantiate_learners(game: &GameSpec, specs: &[LearnerSpec]) -> Result<Vec<LearnerPolicy>> {
    let learners = game.num_players().saturating_sub(1);
    if specs.len() != learners {
        return Err(invalid_config(format!(
            "game has {learners} learners but {} learner blocks were given",
            specs.len()
        )));
    }
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| s.instantiate(game, i))
        .collect()
}

/// Occurrence counts of the restricted profiles over the first `t` rounds.
pub fn empirical_counts(traj: &Trajectory, players: &[usize], t: usize) -> Result<Vec<u64>> {
    let game = &traj.game;
    check_scope(game, players)?;
    if t == 0 || t > traj.horizon() {
        return Err(invalid_input(format!(
            "round {t} is outside the trajectory (1..={})",
            traj.horizon()
        )));
    }
    let sizes: Vec<usize> = players.iter().map(|&i| game.num_actions(i)).collect();
    let mut counts = vec![0u64; sizes.iter().product()];
    for &idx in &traj.profiles[..t] {
        counts[restricted_index(game, players, &sizes, idx)] += 1;
    }
    Ok(counts)
}

fn check_scope(game: &GameSpec, players: &[usize]) -> Result<()> {
    if players.is_empty() || players.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid_input("player subset must be nonempty and increasing"));
    }
    if players.iter().any(|&i| i >= game.num_players()) {
        return Err(invalid_input("player subset names a player outside the game"));
    }
    Ok(())
}

fn restricted_index(game: &GameSpec, players: &[usize], sizes: &[usize], idx: usize) -> usize {
    players
        .iter()
        .zip(sizes)
        .fold(0, |acc, (&i, &k)| acc * k + game.action_in(idx, i))
}

/// `Z_t` restricted to `players`, over the whole trajectory.
pub fn empirical_distribution(traj: &Trajectory, players: &[usize]) -> Result<JointDistribution> {
    empirical_distribution_at(traj, players, traj.horizon())
}

/// `Z_t` restricted to `players`, over the first `t` rounds.
pub fn empirical_distribution_at(
    traj: &Trajectory,
    players: &[usize],
    t: usize,
) -> Result<JointDistribution> {
    let counts = empirical_counts(traj, players, t)?;
    let sizes = players.iter().map(|&i| traj.game.num_actions(i)).collect();
    let probs = counts.iter().map(|&c| c as f64 / t as f64).collect();
    JointDistribution::new(players.to_vec(), sizes, probs)
}

/// Checkpoints `1, 10, 100, ...` up to `rounds`, ending at `rounds`.
pub fn default_checkpoints(rounds: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = 1usize;
    while t < rounds {
        out.push(t);
        t = t.saturating_mul(10);
    }
    out.push(rounds);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub t: usize,
    pub avg_opt_payoff: f64,
    pub dist_ced: f64,
    pub dist_hannan: f64,
    /// One entry per learner.
    pub ext_regret: Vec<f64>,
    pub int_regret: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
}

impl MetricsSeries {
    pub fn csv_header(num_learners: usize) -> String {
        let mut h = String::from("seed,t,avg_opt_payoff,dist_ced,dist_hannan");
        for i in 1..=num_learners {
            write!(h, ",ext_regret_p{i}").unwrap();
        }
        for i in 1..=num_learners {
            write!(h, ",int_regret_p{i}").unwrap();
        }
        h
    }

    /// Appends one CSV row per checkpoint, without the header.
    pub fn write_rows(&self, out: &mut String) {
        for r in &self.records {
            write!(
                out,
                "{},{},{},{},{}",
                self.seed,
                r.t,
                sig12(r.avg_opt_payoff),
                sig12(r.dist_ced),
                sig12(r.dist_hannan)
            )
            .unwrap();
            for x in r.ext_regret.iter().chain(&r.int_regret) {
                write!(out, ",{}", sig12(*x)).unwrap();
            }
            out.push('\n');
        }
    }

    pub fn to_csv(&self) -> String {
        let learners = self.records.first().map_or(0, |r| r.ext_regret.len());
        let mut out = Self::csv_header(learners);
        out.push('\n');
        self.write_rows(&mut out);
        out
    }
}

/// Metrics at each checkpoint. Distances are measured in the learners' game
/// induced by `alpha`.
pub fn compute_metrics(traj: &Trajectory, alpha: &MixedStrategy, checkpoints: &[usize]) -> Result<MetricsSeries> {
    let game = &traj.game;
    let n = game.num_players();
    if checkpoints.is_empty() {
        return Err(invalid_input("no checkpoints requested"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid_input("checkpoints must be strictly increasing"));
    }
    if checkpoints[0] == 0 || *checkpoints.last().unwrap() > traj.horizon() {
        return Err(invalid_input(format!(
            "checkpoints must lie in 1..={}",
            traj.horizon()
        )));
    }
    let induced = induce_game(game, alpha)?;
    let learners: Vec<usize> = (0..n - 1).collect();
    let sizes = induced.sizes().to_vec();
    let u_opt = game.utilities(n - 1);

    let mut tallies: Vec<RegretTally> = learners.iter().map(|&i| RegretTally::new(game, i)).collect();
    let mut counts = vec![0u64; induced.num_profiles()];
    let mut payoff = 0.0;
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for (s, &idx) in traj.profiles.iter().enumerate() {
        payoff += u_opt[idx];
        counts[restricted_index(game, &learners, &sizes, idx)] += 1;
        for tally in tallies.iter_mut() {
            tally.record(game, idx);
        }
        let t = s + 1;
        if t == checkpoints[next] {
            let z = JointDistribution::new(
                learners.clone(),
                sizes.clone(),
                counts.iter().map(|&c| c as f64 / t as f64).collect(),
            )?;
            records.push(MetricsRecord {
                t,
                avg_opt_payoff: payoff / t as f64,
                dist_ced: l1_projection(&z, &induced, SetKind::Correlated)?.distance,
                dist_hannan: l1_projection(&z, &induced, SetKind::Hannan)?.distance,
                ext_regret: tallies.iter().map(RegretTally::external).collect(),
                int_regret: tallies.iter().map(RegretTally::internal).collect(),
            });
            next += 1;
            if next == checkpoints.len() {
                break;
            }
        }
    }
    Ok(MetricsSeries {
        seed: traj.seed,
        records,
    })
}

/// `(1/M) sum_t (u_i(a^t) - u_i(a_-n^t, alpha))`: how far the realized
/// optimizer actions pulled player `i`'s average payoff from its value
/// under `alpha`.
pub fn check_slln_drift(traj: &Trajectory, alpha: &MixedStrategy, player: usize) -> Result<f64> {
    let game = &traj.game;
    let n = game.optimizer();
    if player >= game.num_players() {
        return Err(invalid_input(format!("no player {}", player + 1)));
    }
    alpha.check_for(game, n)?;
    let u = game.utilities(player);
    let total: f64 = traj
        .profiles
        .iter()
        .map(|&idx| {
            let expected: f64 = alpha
                .probs()
                .iter()
                .enumerate()
                .map(|(b, p)| p * u[game.deviate(idx, n, b)])
                .sum();
            u[idx] - expected
        })
        .sum();
    Ok(total / traj.horizon() as f64)
}

/// Outcome of running the value-witness commitment against regret-matching
/// learners over several seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub learner_kind: LearnerKind,
    /// Which polytope the value is taken over.
    pub set: SetKind,
    pub value: f64,
    pub method: Method,
    pub alpha: MixedStrategy,
    pub rounds: usize,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    pub per_seed_average: Vec<f64>,
    pub mean_average: f64,
    pub min_average: f64,
    /// `mean_average >= value - epsilon`.
    pub expected_pass: bool,
    /// `min_average >= value - epsilon`.
    pub pathwise_pass: bool,
}

impl GuaranteeReport {
    pub fn threshold(&self) -> f64 {
        self.value - self.epsilon
    }
}

/// Commits to the witness of `v_corr` (internal-regret learners) or `v_h`
/// (external-regret learners) and plays it for `rounds` rounds per seed.
/// Seeds run in parallel; results keep the order of `seeds`.
pub fn verify_guarantee(
    game: &GameSpec,
    learner: &LearnerSpec,
    rounds: usize,
    seeds: &[u64],
    epsilon: f64,
    grid_resolution: f64,
) -> Result<GuaranteeReport> {
    if !(epsilon > 0.0) {
        return Err(invalid_config(format!("epsilon must be positive, got {epsilon}")));
    }
    if seeds.is_empty() {
        return Err(invalid_config("at least one seed is required"));
    }
    if rounds == 0 {
        return Err(invalid_config("the number of rounds must be at least 1"));
    }
    let (set, value) = match learner.kind {
        LearnerKind::InternalRegretMatching => {
            (SetKind::Correlated, correlated_stackelberg_value(game, grid_resolution)?)
        }
        LearnerKind::ExternalRegretMatching => {
            (SetKind::Hannan, hannan_stackelberg_value(game, grid_resolution)?)
        }
        kind => {
            return Err(invalid_config(format!(
                "guarantees concern regret-matching learners; {kind} is a fixed script"
            )))
        }
    };
    let specs = vec![learner.clone(); game.num_players() - 1];
    // fail fast on configuration errors before spawning work
    instantiate_learners(game, &specs)?;
    let optimizer = OptimizerPolicy::FixedMixed(value.alpha.clone());
    let per_seed_average = seeds
        .par_iter()
        .map(|&seed| {
            let traj = run(game, &optimizer, instantiate_learners(game, &specs)?, rounds, seed)?;
            Ok(traj.average_optimizer_payoff(rounds))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_average = per_seed_average.iter().sum::<f64>() / seeds.len() as f64;
    let min_average = per_seed_average.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = value.value - epsilon;
    Ok(GuaranteeReport {
        learner_kind: learner.kind,
        set,
        value: value.value,
        method: value.method,
        alpha: value.alpha,
        rounds,
        epsilon,
        seeds: seeds.to_vec(),
        per_seed_average,
        mean_average,
        min_average,
        expected_pass: mean_average >= threshold,
        pathwise_pass: min_average >= threshold,
    })
}
