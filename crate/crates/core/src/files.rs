//! TOML game files and experiment configurations.
//!
//! A game file lists action labels per player and one utility row per pure
//! profile, in lexicographic profile order with the last player fastest:
//!
//! ```toml
//! players = 3
//! actions = [["T", "B"], ["L", "R"], ["E"]]
//! utilities = [
//!   [1.0, 1.0, 0.0],  # (T,L,E)
//!   [0.0, 0.0, 1.0],  # (T,R,E)
//!   [0.0, 0.0, -1.0], # (B,L,E)
//!   [1.0, 1.0, 0.0],  # (B,R,E)
//! ]
//! ```
//!
//! Validation failures point at the offending line and column.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use toml::Spanned;

use crate::equilibria::stackelberg::DEFAULT_GRID_RESOLUTION;
use crate::error::{Error, Result};
use crate::fixtures::{ce1_game, ce2_extended_game, ce2_game};
use crate::game::{GameSpec, MixedStrategy};
use crate::learners::{LearnerKind, LearnerSpec, TieBreak};
use crate::simulation::OptimizerPolicy;

/// Source text with a display path, used to anchor diagnostics.
struct Source<'a> {
    path: &'a str,
    text: &'a str,
}

impl Source<'_> {
    fn error(&self, span: Range<usize>, message: impl Into<String>) -> Error {
        let (line, column) = line_column(self.text, span.start);
        Error::Parse {
            path: self.path.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn syntax(&self, e: toml::de::Error) -> Error {
        let span = e.span().unwrap_or(0..0);
        self.error(span, e.message().trim_end().to_string())
    }

    fn whole(&self, message: impl Into<String>) -> Error {
        self.error(0..0, message)
    }
}

/// 1-based line and column (in characters) of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        column: 0,
        message: format!("cannot read file: {e}"),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    players: Spanned<i64>,
    actions: Spanned<Vec<Spanned<Vec<Spanned<String>>>>>,
    utilities: Spanned<Vec<Spanned<Vec<f64>>>>,
}

/// Parses a game file's contents. `path` is only used in diagnostics.
pub fn parse_game(text: &str, path: &str) -> Result<GameSpec> {
    let src = Source { path, text };
    let raw: RawGame = toml::from_str(text).map_err(|e| src.syntax(e))?;

    let n = *raw.players.get_ref();
    if n < 2 {
        return Err(src.error(
            raw.players.span(),
            "a game needs at least two players (learners first, optimizer last)",
        ));
    }
    let n = n as usize;
    if raw.actions.get_ref().len() != n {
        return Err(src.error(
            raw.actions.span(),
            format!(
                "expected {n} action lists, found {}",
                raw.actions.get_ref().len()
            ),
        ));
    }
    let mut labels = Vec::with_capacity(n);
    for (i, set) in raw.actions.get_ref().iter().enumerate() {
        if set.get_ref().is_empty() {
            return Err(src.error(set.span(), format!("player {} has no actions", i + 1)));
        }
        let mut seen = HashSet::new();
        for label in set.get_ref() {
            let l = label.get_ref();
            if l.is_empty() {
                return Err(src.error(label.span(), "empty action label"));
            }
            if !seen.insert(l.as_str()) {
                return Err(src.error(
                    label.span(),
                    format!("duplicate action label {l:?} for player {}", i + 1),
                ));
            }
        }
        labels.push(set.get_ref().iter().map(|l| l.get_ref().clone()).collect::<Vec<_>>());
    }

    let sizes: Vec<usize> = labels.iter().map(Vec::len).collect();
    let profiles: usize = sizes.iter().product();
    let rows = raw.utilities.get_ref();
    if rows.len() != profiles {
        return Err(src.error(
            raw.utilities.span(),
            format!("expected {profiles} utility rows (one per pure profile), found {}", rows.len()),
        ));
    }
    let mut utilities = vec![Vec::with_capacity(profiles); n];
    for row in rows {
        if row.get_ref().len() != n {
            return Err(src.error(
                row.span(),
                format!("expected {n} utilities in this row, found {}", row.get_ref().len()),
            ));
        }
        if row.get_ref().iter().any(|u| !u.is_finite()) {
            return Err(src.error(row.span(), "utilities must be finite"));
        }
        for (i, &u) in row.get_ref().iter().enumerate() {
            utilities[i].push(u);
        }
    }
    GameSpec::new(labels, utilities).map_err(|e| src.whole(e.to_string()))
}

pub fn load_game(path: &Path) -> Result<GameSpec> {
    parse_game(&read(path)?, &path.display().to_string())
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Writes a game in the file format; parsing the result gives back an
/// identical game (floats use the shortest exact representation).
pub fn serialize_game(game: &GameSpec) -> String {
    let n = game.num_players();
    let mut out = String::new();
    writeln!(out, "players = {n}").unwrap();
    let sets: Vec<String> = game
        .all_action_labels()
        .iter()
        .map(|set| {
            let items: Vec<String> = set.iter().map(|l| toml_string(l)).collect();
            format!("[{}]", items.join(", "))
        })
        .collect();
    writeln!(out, "actions = [{}]", sets.join(", ")).unwrap();
    out.push_str("utilities = [\n");
    for idx in 0..game.num_profiles() {
        let row: Vec<String> = (0..n).map(|i| format!("{:?}", game.utility_at(i, idx))).collect();
        let label = game.profile_label(&game.decode_profile(idx));
        writeln!(out, "  [{}], # {}", row.join(", "), label).unwrap();
    }
    out.push_str("]\n");
    out
}

/// Built-in games addressable as `builtin:<name>` in experiment files.
pub fn builtin_game(name: &str) -> Option<GameSpec> {
    match name {
        "ce1" => Some(ce1_game()),
        "ce2" => Some(ce2_game()),
        "ce2-extended" => Some(ce2_extended_game()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Values,
    Counterexample,
    Guarantee,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Values => "values",
            Mode::Counterexample => "counterexample",
            Mode::Guarantee => "guarantee",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "values" => Ok(Mode::Values),
            "counterexample" => Ok(Mode::Counterexample),
            "guarantee" => Ok(Mode::Guarantee),
            _ => Err(format!(
                "unknown mode {s:?} (expected simulate, values, counterexample or guarantee)"
            )),
        }
    }
}

/// Which scripted counterexample to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counterexample {
    Ce1,
    Ce2,
}

impl Counterexample {
    pub fn name(self) -> &'static str {
        match self {
            Counterexample::Ce1 => "ce1",
            Counterexample::Ce2 => "ce2",
        }
    }

    pub fn game(self) -> GameSpec {
        match self {
            Counterexample::Ce1 => ce1_game(),
            Counterexample::Ce2 => ce2_game(),
        }
    }

    pub fn learner_kind(self) -> LearnerKind {
        match self {
            Counterexample::Ce1 => LearnerKind::ScriptedCe1,
            Counterexample::Ce2 => LearnerKind::ScriptedCe2,
        }
    }
}

impl FromStr for Counterexample {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ce1" => Ok(Counterexample::Ce1),
            "ce2" => Ok(Counterexample::Ce2),
            _ => Err(format!("unknown counterexample {s:?} (expected ce1 or ce2)")),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    kind: Spanned<String>,
    alpha: Option<Spanned<Vec<f64>>>,
    sequence: Option<Spanned<Vec<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLearner {
    kind: Spanned<String>,
    tie_break: Option<Spanned<String>>,
    mu: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Spanned<String>,
    game: Option<Spanned<String>>,
    counterexample: Option<Spanned<String>>,
    rounds: Option<Spanned<i64>>,
    seeds: Option<Spanned<Vec<Spanned<i64>>>>,
    epsilon: Option<Spanned<f64>>,
    grid_resolution: Option<Spanned<f64>>,
    checkpoints: Option<Spanned<Vec<i64>>>,
    output: Option<Spanned<String>>,
    optimizer: Option<Spanned<RawOptimizer>>,
    learners: Option<Spanned<Vec<Spanned<RawLearner>>>>,
}

/// A validated experiment file. Paths are resolved against the directory
/// holding the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub game_path: Option<PathBuf>,
    pub game: Option<GameSpec>,
    pub counterexample: Option<Counterexample>,
    pub rounds: Option<usize>,
    pub seeds: Vec<u64>,
    pub epsilon: Option<f64>,
    pub grid_resolution: f64,
    pub checkpoints: Option<Vec<usize>>,
    pub output: Option<PathBuf>,
    pub optimizer: Option<OptimizerPolicy>,
    /// One spec per learner, in player order.
    pub learners: Vec<LearnerSpec>,
}

fn require<'a, T>(src: &Source, field: &'a Option<Spanned<T>>, name: &str, mode: Mode) -> Result<&'a Spanned<T>> {
    field
        .as_ref()
        .ok_or_else(|| src.whole(format!("mode {mode} requires `{name}`")))
}

fn forbid<T>(src: &Source, field: &Option<Spanned<T>>, name: &str, mode: Mode) -> Result<()> {
    match field {
        Some(f) => Err(src.error(f.span(), format!("`{name}` is not used in mode {mode}"))),
        None => Ok(()),
    }
}

/// Parses an experiment file. `base` is the directory relative paths are
/// resolved against; `path` is only used in diagnostics.
pub fn parse_config(text: &str, path: &str, base: &Path) -> Result<ExperimentConfig> {
    let src = Source { path, text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| src.syntax(e))?;
    let mode: Mode = raw
        .mode
        .get_ref()
        .parse()
        .map_err(|m: String| src.error(raw.mode.span(), m))?;

    let rounds = match &raw.rounds {
        Some(r) if *r.get_ref() < 1 => {
            return Err(src.error(r.span(), "rounds must be at least 1"));
        }
        Some(r) => Some(*r.get_ref() as usize),
        None => None,
    };
    let mut seeds = Vec::new();
    if let Some(list) = &raw.seeds {
        if list.get_ref().is_empty() {
            return Err(src.error(list.span(), "seeds must not be empty"));
        }
        for s in list.get_ref() {
            if *s.get_ref() < 0 {
                return Err(src.error(s.span(), "seeds are nonnegative integers"));
            }
            seeds.push(*s.get_ref() as u64);
        }
    }
    let grid_resolution = match &raw.grid_resolution {
        Some(g) => {
            let r = *g.get_ref();
            if !(r > 0.0 && r <= 1.0) {
                return Err(src.error(g.span(), "grid_resolution must lie in (0, 1]"));
            }
            r
        }
        None => DEFAULT_GRID_RESOLUTION,
    };
    let epsilon = match &raw.epsilon {
        Some(e) if !(*e.get_ref() > 0.0 && e.get_ref().is_finite()) => {
            return Err(src.error(e.span(), "epsilon must be positive"));
        }
        Some(e) => Some(*e.get_ref()),
        None => None,
    };
    let output = raw.output.as_ref().map(|o| base.join(o.get_ref()));

    let mut config = ExperimentConfig {
        mode,
        game_path: None,
        game: None,
        counterexample: None,
        rounds,
        seeds,
        epsilon,
        grid_resolution,
        checkpoints: None,
        output,
        optimizer: None,
        learners: Vec::new(),
    };

    if mode == Mode::Counterexample {
        let which = require(&src, &raw.counterexample, "counterexample", mode)?;
        config.counterexample = Some(
            which
                .get_ref()
                .parse()
                .map_err(|m: String| src.error(which.span(), m))?,
        );
        require(&src, &raw.rounds, "rounds", mode)?;
        forbid(&src, &raw.game, "game", mode)?;
        forbid(&src, &raw.optimizer, "optimizer", mode)?;
        forbid(&src, &raw.learners, "learners", mode)?;
        return Ok(config);
    }
    forbid(&src, &raw.counterexample, "counterexample", mode)?;

    let game_field = require(&src, &raw.game, "game", mode)?;
    let game = match game_field.get_ref().strip_prefix("builtin:") {
        Some(name) => builtin_game(name).ok_or_else(|| {
            src.error(
                game_field.span(),
                format!("unknown built-in game {name:?} (expected ce1, ce2 or ce2-extended)"),
            )
        })?,
        None => {
            let p = base.join(game_field.get_ref());
            let g = load_game(&p)?;
            config.game_path = Some(p);
            g
        }
    };

    if mode == Mode::Values {
        forbid(&src, &raw.optimizer, "optimizer", mode)?;
        forbid(&src, &raw.learners, "learners", mode)?;
        config.game = Some(game);
        return Ok(config);
    }

    require(&src, &raw.rounds, "rounds", mode)?;
    require(&src, &raw.seeds, "seeds", mode)?;
    let learner_blocks = require(&src, &raw.learners, "learners", mode)?;
    config.learners = parse_learners(&src, learner_blocks, &game)?;

    if let Some(cp) = &raw.checkpoints {
        let list = cp.get_ref();
        let rounds = rounds.unwrap_or(0) as i64;
        if list.is_empty()
            || list.windows(2).any(|w| w[0] >= w[1])
            || list[0] < 1
            || *list.last().unwrap() > rounds
        {
            return Err(src.error(
                cp.span(),
                format!("checkpoints must be strictly increasing values in 1..={rounds}"),
            ));
        }
        config.checkpoints = Some(list.iter().map(|&t| t as usize).collect());
    }

    match mode {
        Mode::Simulate => {
            let opt = require(&src, &raw.optimizer, "optimizer", mode)?;
            config.optimizer = Some(parse_optimizer(&src, opt, &game)?);
        }
        Mode::Guarantee => {
            require(&src, &raw.epsilon, "epsilon", mode)?;
            if let Some(opt) = &raw.optimizer {
                return Err(src.error(
                    opt.span(),
                    "mode guarantee commits to the value witness; remove the optimizer block",
                ));
            }
            let first = &config.learners[0];
            if let Some(b) = config.learners.iter().position(|l| l != first) {
                let span = learner_blocks.get_ref()[b.min(learner_blocks.get_ref().len() - 1)].span();
                return Err(src.error(span, "mode guarantee needs every learner to run the same algorithm"));
            }
            if first.kind.is_scripted() {
                return Err(src.error(
                    learner_blocks.get_ref()[0].span(),
                    "guarantees concern regret-matching learners, not scripted ones",
                ));
            }
        }
        _ => unreachable!(),
    }
    config.game = Some(game);
    Ok(config)
}

/// One block per learner, or a single block shared by every learner.
fn parse_learners(
    src: &Source,
    blocks: &Spanned<Vec<Spanned<RawLearner>>>,
    game: &GameSpec,
) -> Result<Vec<LearnerSpec>> {
    let count = game.num_players() - 1;
    let list = blocks.get_ref();
    if list.len() != count && list.len() != 1 {
        return Err(src.error(
            blocks.span(),
            format!(
                "game has {count} learners; give one [[learners]] block each or a single shared block, found {}",
                list.len()
            ),
        ));
    }
    let mut specs = Vec::with_capacity(count);
    for player in 0..count {
        let block = &list[player.min(list.len() - 1)];
        let raw = block.get_ref();
        let kind: LearnerKind = raw
            .kind
            .get_ref()
            .parse()
            .map_err(|e: Error| src.error(raw.kind.span(), message_of(e)))?;
        let tie_break = match &raw.tie_break {
            Some(t) => Some(
                t.get_ref()
                    .parse::<TieBreak>()
                    .map_err(|e| src.error(t.span(), message_of(e)))?,
            ),
            None => None,
        };
        let spec = LearnerSpec {
            kind,
            tie_break,
            mu: raw.mu.as_ref().map(|m| *m.get_ref()),
        };
        spec.instantiate(game, player).map_err(|e| {
            let span = match (&e, &raw.mu) {
                (Error::InvalidConfiguration(m), Some(mu)) if m.contains("mu") => mu.span(),
                _ => block.span(),
            };
            src.error(span, format!("learner {}: {}", player + 1, message_of(e)))
        })?;
        specs.push(spec);
    }
    Ok(specs)
}

fn parse_optimizer(src: &Source, block: &Spanned<RawOptimizer>, game: &GameSpec) -> Result<OptimizerPolicy> {
    let raw = block.get_ref();
    let n = game.optimizer();
    match raw.kind.get_ref().as_str() {
        "fixed-mixed" => {
            if let Some(s) = &raw.sequence {
                return Err(src.error(s.span(), "`sequence` belongs to scripted optimizers"));
            }
            let alpha = raw
                .alpha
                .as_ref()
                .ok_or_else(|| src.error(block.span(), "fixed-mixed optimizer requires `alpha`"))?;
            let k = game.num_actions(n);
            if alpha.get_ref().len() != k {
                return Err(src.error(
                    alpha.span(),
                    format!("alpha needs {k} entries, one per optimizer action; found {}", alpha.get_ref().len()),
                ));
            }
            let strategy = MixedStrategy::new(n, alpha.get_ref().clone())
                .map_err(|e| src.error(alpha.span(), format!("alpha is not a probability vector: {}", message_of(e))))?;
            Ok(OptimizerPolicy::FixedMixed(strategy))
        }
        "scripted" => {
            if let Some(a) = &raw.alpha {
                return Err(src.error(a.span(), "`alpha` belongs to fixed-mixed optimizers"));
            }
            let seq = raw
                .sequence
                .as_ref()
                .ok_or_else(|| src.error(block.span(), "scripted optimizer requires `sequence`"))?;
            if seq.get_ref().is_empty() {
                return Err(src.error(seq.span(), "sequence must not be empty"));
            }
            let actions = seq
                .get_ref()
                .iter()
                .map(|l| {
                    game.action_index(n, l).ok_or_else(|| {
                        src.error(seq.span(), format!("{l:?} is not an optimizer action"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OptimizerPolicy::Scripted(actions))
        }
        other => Err(src.error(
            raw.kind.span(),
            format!("unknown optimizer kind {other:?} (expected fixed-mixed or scripted)"),
        )),
    }
}

fn message_of(e: Error) -> String {
    match e {
        Error::InvalidInput(m)
        | Error::InvalidConfiguration(m)
        | Error::UnsupportedSize(m)
        | Error::Internal(m) => m,
        Error::Parse { message, .. } => message,
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = read(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, &path.display().to_string(), base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CE2: &str = r#"
players = 3
actions = [["T", "B"], ["L", "R"], ["E"]]
utilities = [
  [1, 1, 0],
  [0, 0, 1],
  [0, 0, -1],
  [1, 1, 0],
]
"#;

    fn parse_err(text: &str) -> (usize, usize, String) {
        match parse_game(text, "g.toml") {
            Err(Error::Parse {
                line,
                column,
                message,
                ..
            }) => (line, column, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_the_second_counterexample() {
        assert_eq!(parse_game(CE2, "ce2.toml").unwrap(), ce2_game());
    }

    #[test]
    fn round_trip_is_exact() {
        for g in [ce1_game(), ce2_extended_game(), crate::fixtures::random_game(&[2, 3, 2], 7)] {
            let text = serialize_game(&g);
            assert_eq!(parse_game(&text, "x").unwrap(), g, "{text}");
        }
    }

    #[test]
    fn diagnostics_point_at_the_problem() {
        let short = CE2.replace("[0, 0, 1],", "[0, 0],");
        let (line, column, message) = parse_err(&short);
        assert_eq!((line, column), (6, 3));
        assert!(message.contains("expected 3 utilities"));

        let (line, _, _) = parse_err("players = 3\nactions = [[\"T\"]\nutilities = []\n");
        assert_eq!(line, 3);

        let dup = CE2.replace("[\"L\", \"R\"]", "[\"L\", \"L\"]");
        let (line, _, message) = parse_err(&dup);
        assert_eq!(line, 3);
        assert!(message.contains("duplicate"));
    }

    #[test]
    fn config_alpha_must_be_stochastic() {
        let text = r#"mode = "simulate"
game = "builtin:ce2-extended"
rounds = 10
seeds = [1]

[optimizer]
kind = "fixed-mixed"
alpha = [0.5, 0.6]

[[learners]]
kind = "internal-regret-matching"
"#;
        match parse_config(text, "c.toml", Path::new(".")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 8);
                assert!(message.contains("alpha"));
            }
            other => panic!("{other:?}"),
        }
        let fixed = text.replace("0.6", "0.5");
        let c = parse_config(&fixed, "c.toml", Path::new(".")).unwrap();
        assert_eq!(c.learners.len(), 2);
        assert_eq!(c.mode, Mode::Simulate);
    }

    #[test]
    fn config_mode_requirements() {
        let missing = "mode = \"guarantee\"\ngame = \"builtin:ce2\"\nrounds = 5\nseeds = [1]\n[[learners]]\nkind = \"internal-regret-matching\"\n";
        assert!(parse_config(missing, "c", Path::new(".")).is_err());
        let ok = format!("{missing}").replace("seeds", "epsilon = 0.05\nseeds");
        assert!(parse_config(&ok, "c", Path::new(".")).is_ok());
        let zero = ok.replace("0.05", "0.0");
        assert!(parse_config(&zero, "c", Path::new(".")).is_err());
        let scripted = ok.replace("internal-regret-matching", "scripted-ce2");
        assert!(parse_config(&scripted, "c", Path::new(".")).is_err());

        let small_mu = "mode = \"simulate\"\ngame = \"builtin:ce2\"\nrounds = 5\nseeds = [1]\n[optimizer]\nkind = \"scripted\"\nsequence = [\"E\"]\n[[learners]]\nkind = \"internal-regret-matching\"\nmu = 0.5\n";
        match parse_config(small_mu, "c", Path::new(".")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
    }
}
