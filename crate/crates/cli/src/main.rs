mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use stackel::equilibria::{mixed_stackelberg_values, pure_stackelberg_values, stackelberg_report};
use stackel::files::{load_config, load_game, Counterexample, ExperimentConfig, Mode};
use stackel::format::sig12;
use stackel::learners::LearnerSpec;
use stackel::simulation::{
    compute_metrics, default_checkpoints, instantiate_learners, run, verify_guarantee,
    MetricsSeries, OptimizerPolicy, Trajectory,
};
use stackel::{Error, GameSpec, MixedStrategy};

#[derive(Parser)]
#[command(name = "stackel", version, about = "Stackelberg values and regret-matching simulations for repeated games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the pure, mixed, correlated and Hannan Stackelberg values of a game file
    Values {
        game: PathBuf,
        /// Grid spacing over the optimizer's simplex
        #[arg(long, default_value_t = stackel::equilibria::DEFAULT_GRID_RESOLUTION)]
        grid: f64,
        /// Also write the report to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the simulations of an experiment file and write the metrics CSV
    Simulate {
        config: PathBuf,
        /// Write one trajectory CSV per seed into this directory
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Replay a scripted counterexample with its built-in game
    Counterexample {
        #[arg(value_parser = parse_which)]
        which: Counterexample,
        #[arg(long)]
        rounds: usize,
        /// Directory for <which>_trajectory.csv and <which>_metrics.csv
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Play the value witness against regret-matching learners over several seeds
    Guarantee { config: PathBuf },
    /// Dispatch on the `mode` field of an experiment file
    Run { config: PathBuf },
}

fn parse_which(s: &str) -> Result<Counterexample, String> {
    s.parse()
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    print!("{text}");
    if let Some(path) = out {
        write_file(path, text)?;
    }
    Ok(())
}

fn cmd_values(game: &GameSpec, source: &str, grid: f64, out: Option<&Path>) -> CliResult<()> {
    let report = stackelberg_report(game, grid)?;
    emit(&report::values_report(game, source, &report), out)
}

fn cmd_counterexample(which: Counterexample, rounds: usize, dir: &Path) -> CliResult<()> {
    if rounds == 0 {
        return Err(usage("--rounds must be at least 1"));
    }
    let game = which.game();
    let specs = vec![LearnerSpec::new(which.learner_kind()); game.num_players() - 1];
    let alpha = MixedStrategy::pure(game.optimizer(), 1, 0);
    let traj = run(
        &game,
        &OptimizerPolicy::FixedMixed(alpha.clone()),
        instantiate_learners(&game, &specs)?,
        rounds,
        0,
    )?;
    let metrics = compute_metrics(&traj, &alpha, &default_checkpoints(rounds))?;
    let traj_path = dir.join(format!("{}_trajectory.csv", which.name()));
    let metrics_path = dir.join(format!("{}_metrics.csv", which.name()));
    write_file(&traj_path, &traj.to_csv())?;
    write_file(&metrics_path, &metrics.to_csv())?;

    let (name, value) = match which {
        Counterexample::Ce1 => {
            let v = pure_stackelberg_values(&game, stackel::equilibria::DEFAULT_GRID_RESOLUTION)?
                .optimistic
                .ok_or_else(|| Error::Internal("V_pure of the first counterexample is missing".into()))?;
            ("V_pure", v.value)
        }
        Counterexample::Ce2 => {
            let (_, v) = mixed_stackelberg_values(&game, stackel::equilibria::DEFAULT_GRID_RESOLUTION)?;
            ("v_mixed", v.value)
        }
    };
    let avg = traj.average_optimizer_payoff(rounds);
    let relation = if avg < value { "<" } else { ">=" };
    println!("rounds = {rounds}");
    println!("trajectory = \"{}\"", traj_path.display());
    println!("metrics = \"{}\"", metrics_path.display());
    println!("avg {} {relation} {name} {}", sig12(avg), sig12(value));
    Ok(())
}

fn require_mode(config: &ExperimentConfig, mode: Mode, path: &Path) -> CliResult<()> {
    if config.mode != mode {
        return Err(usage(format!(
            "{} has mode {}, expected {mode}",
            path.display(),
            config.mode
        )));
    }
    Ok(())
}

/// Strategy the metrics are measured against: the committed strategy, or the
/// action frequencies of one period of a scripted sequence.
fn reference_alpha(game: &GameSpec, optimizer: &OptimizerPolicy) -> stackel::Result<MixedStrategy> {
    match optimizer {
        OptimizerPolicy::FixedMixed(alpha) => Ok(alpha.clone()),
        OptimizerPolicy::Scripted(seq) => {
            let mut freq = vec![0.0; game.num_actions(game.optimizer())];
            for &a in seq {
                freq[a] += 1.0 / seq.len() as f64;
            }
            MixedStrategy::from_approximate(game.optimizer(), freq)
        }
    }
}

fn simulate(config: &ExperimentConfig) -> stackel::Result<Vec<(Trajectory, MetricsSeries)>> {
    let game = config.game.as_ref().expect("validated simulate config");
    let optimizer = config.optimizer.as_ref().expect("validated simulate config");
    let rounds = config.rounds.expect("validated simulate config");
    let alpha = reference_alpha(game, optimizer)?;
    let checkpoints = config
        .checkpoints
        .clone()
        .unwrap_or_else(|| default_checkpoints(rounds));
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let learners = instantiate_learners(game, &config.learners)?;
            let traj = run(game, optimizer, learners, rounds, seed)?;
            let metrics = compute_metrics(&traj, &alpha, &checkpoints)?;
            Ok((traj, metrics))
        })
        .collect()
}

fn cmd_simulate(config: &ExperimentConfig, trajectories: Option<&Path>) -> CliResult<()> {
    let results = simulate(config)?;
    let game = config.game.as_ref().expect("validated simulate config");
    let mut csv = MetricsSeries::csv_header(game.num_players() - 1);
    csv.push('\n');
    for (_, metrics) in &results {
        metrics.write_rows(&mut csv);
    }
    match &config.output {
        Some(path) => {
            write_file(path, &csv)?;
            println!("metrics = \"{}\"", path.display());
        }
        None => print!("{csv}"),
    }
    if let Some(dir) = trajectories {
        for (traj, _) in &results {
            let path = dir.join(format!("trajectory_seed{}.csv", traj.seed()));
            write_file(&path, &traj.to_csv())?;
        }
    }
    Ok(())
}

fn cmd_guarantee(config: &ExperimentConfig) -> CliResult<()> {
    let game = config.game.as_ref().expect("validated guarantee config");
    let report = verify_guarantee(
        game,
        &config.learners[0],
        config.rounds.expect("validated guarantee config"),
        &config.seeds,
        config.epsilon.expect("validated guarantee config"),
        config.grid_resolution,
    )?;
    emit(&report::guarantee_report(&report), config.output.as_deref())
}

fn run_config(path: &Path, expected: Option<Mode>, trajectories: Option<&Path>) -> CliResult<()> {
    let config = load_config(path)?;
    if let Some(mode) = expected {
        require_mode(&config, mode, path)?;
    }
    match config.mode {
        Mode::Simulate => cmd_simulate(&config, trajectories),
        Mode::Guarantee => cmd_guarantee(&config),
        Mode::Values => {
            let game = config.game.as_ref().expect("validated values config");
            let source = config
                .game_path
                .as_ref()
                .map_or_else(|| "builtin".to_string(), |p| p.display().to_string());
            cmd_values(game, &source, config.grid_resolution, config.output.as_deref())
        }
        Mode::Counterexample => {
            let dir = config.output.clone().unwrap_or_else(|| PathBuf::from("."));
            cmd_counterexample(
                config.counterexample.expect("validated counterexample config"),
                config.rounds.expect("validated counterexample config"),
                &dir,
            )
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Values { game, grid, out } => {
            let spec = load_game(&game)?;
            cmd_values(&spec, &game.display().to_string(), grid, out.as_deref())
        }
        Command::Simulate {
            config,
            trajectories,
        } => run_config(&config, Some(Mode::Simulate), trajectories.as_deref()),
        Command::Counterexample { which, rounds, out } => cmd_counterexample(which, rounds, &out),
        Command::Guarantee { config } => run_config(&config, Some(Mode::Guarantee), None),
        Command::Run { config } => run_config(&config, None, None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::UnsupportedSize(_) => 2,
                Error::Internal(_) => 3,
                _ => 1,
            })
        }
    }
}
