//! Text renderings of solver and guarantee results.

use std::fmt::Write as _;

use stackel::equilibria::{Response, StackelbergReport, StackelbergValue};
use stackel::format::sig12;
use stackel::simulation::GuaranteeReport;
use stackel::GameSpec;

fn vector(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| sig12(*x)).collect();
    format!("[{}]", items.join(", "))
}

fn learner_labels(game: &GameSpec, profile: &[usize]) -> String {
    let labels: Vec<&str> = profile
        .iter()
        .enumerate()
        .map(|(i, &a)| game.action_labels(i)[a].as_str())
        .collect();
    format!("({})", labels.join(","))
}

fn response(game: &GameSpec, r: &Response) -> String {
    match r {
        Response::Pure(profile) => format!("\"{}\"", learner_labels(game, profile)),
        Response::Mixed(profile) => {
            let parts: Vec<String> = profile
                .strategies()
                .iter()
                .map(|s| format!("p{} = {}", s.player() + 1, vector(s.probs())))
                .collect();
            format!("{{ {} }}", parts.join(", "))
        }
        Response::Correlated(dist) => {
            let learners = game.num_players() - 1;
            let sizes = &game.sizes()[..learners];
            let parts: Vec<String> = dist
                .probs()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(idx, p)| {
                    let mut rest = idx;
                    let mut profile = vec![0; learners];
                    for i in (0..learners).rev() {
                        profile[i] = rest % sizes[i];
                        rest /= sizes[i];
                    }
                    format!("\"{}\" = {}", learner_labels(game, &profile), sig12(*p))
                })
                .collect();
            format!("{{ {} }}", parts.join(", "))
        }
    }
}

fn section(out: &mut String, game: &GameSpec, name: &str, v: Option<&StackelbergValue>) {
    writeln!(out, "\n[{name}]").unwrap();
    match v {
        None => {
            writeln!(out, "value = \"none\"").unwrap();
        }
        Some(v) => {
            writeln!(out, "value = {}", sig12(v.value)).unwrap();
            writeln!(out, "method = \"{}\"", v.method).unwrap();
            writeln!(out, "alpha = {}", vector(v.alpha.probs())).unwrap();
            writeln!(out, "response = {}", response(game, &v.response)).unwrap();
        }
    }
}

pub fn values_report(game: &GameSpec, source: &str, report: &StackelbergReport) -> String {
    let mut out = String::new();
    writeln!(out, "game = \"{source}\"").unwrap();
    writeln!(out, "optimizer = \"p{}\"", game.num_players()).unwrap();
    writeln!(out, "grid_resolution = {}", sig12(report.grid_resolution)).unwrap();
    section(&mut out, game, "V_pure", report.pure_optimistic.as_ref());
    section(&mut out, game, "v_pure", report.pure_pessimistic.as_ref());
    section(&mut out, game, "V_mixed", Some(&report.mixed_optimistic));
    section(&mut out, game, "v_mixed", Some(&report.mixed_pessimistic));
    section(&mut out, game, "v_corr", Some(&report.correlated));
    section(&mut out, game, "v_h", Some(&report.hannan));

    let chain = &report.chain;
    writeln!(out, "\n[chain]").unwrap();
    writeln!(out, "tolerance = {}", sig12(chain.tolerance)).unwrap();
    writeln!(out, "pure_equilibria_on_whole_grid = {}", report.pure_covers_grid).unwrap();
    writeln!(out, "holds = {}", chain.holds()).unwrap();
    for link in &chain.links {
        writeln!(
            out,
            "\"{} <= {}\" = {{ slack = {}, holds = {} }}",
            link.lower,
            link.upper,
            sig12(link.slack),
            link.holds
        )
        .unwrap();
    }
    out
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn guarantee_report(r: &GuaranteeReport) -> String {
    let value_name = match r.set {
        stackel::equilibria::SetKind::Correlated => "v_corr",
        stackel::equilibria::SetKind::Hannan => "v_h",
    };
    let mut out = String::new();
    writeln!(out, "learners = \"{}\"", r.learner_kind).unwrap();
    writeln!(out, "value = \"{value_name}\"").unwrap();
    writeln!(out, "{value_name} = {}", sig12(r.value)).unwrap();
    writeln!(out, "method = \"{}\"", r.method).unwrap();
    writeln!(out, "alpha = {}", vector(r.alpha.probs())).unwrap();
    writeln!(out, "rounds = {}", r.rounds).unwrap();
    writeln!(out, "epsilon = {}", sig12(r.epsilon)).unwrap();
    writeln!(out, "threshold = {}", sig12(r.threshold())).unwrap();
    writeln!(out, "seed_count = {}", r.seeds.len()).unwrap();
    writeln!(out, "mean_average = {}", sig12(r.mean_average)).unwrap();
    writeln!(out, "min_average = {}", sig12(r.min_average)).unwrap();
    writeln!(out, "\n[per_seed_average]").unwrap();
    for (seed, avg) in r.seeds.iter().zip(&r.per_seed_average) {
        writeln!(out, "{seed} = {}", sig12(*avg)).unwrap();
    }
    writeln!(out, "\n[verdict]").unwrap();
    writeln!(
        out,
        "\"expected-payoff guarantee (mean over seeds)\" = \"{}\"",
        verdict(r.expected_pass)
    )
    .unwrap();
    writeln!(
        out,
        "\"pathwise guarantee (min over seeds)\" = \"{}\"",
        verdict(r.pathwise_pass)
    )
    .unwrap();
    out
}
