use proptest::prelude::*;
use stackel::fixtures::{ce2_extended_game, random_game};
use stackel::learners::{
    measure_regrets, ExternalRegretState, InternalRegretState, LearnerKind, LearnerSpec,
    RegretTally,
};
use stackel::simulation::{
    compute_metrics, empirical_counts, instantiate_learners, run, OptimizerPolicy, Trajectory,
};
use stackel::{GameSpec, MixedStrategy};

fn history_strategy(sizes: &'static [usize]) -> impl Strategy<Value = Vec<Vec<usize>>> {
    let profile = sizes.iter().map(|&k| 0..k).collect::<Vec<_>>();
    prop::collection::vec(profile, 1..200)
}

fn play(game: &GameSpec, spec: &LearnerSpec, alpha: &MixedStrategy, rounds: usize, seed: u64) -> Trajectory {
    let specs = vec![spec.clone(); game.num_players() - 1];
    run(
        game,
        &OptimizerPolicy::FixedMixed(alpha.clone()),
        instantiate_learners(game, &specs).unwrap(),
        rounds,
        seed,
    )
    .unwrap()
}

const SIZES: &[usize] = &[3, 2, 2];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn running_averages_match_batch_sums(seed in 0u64..1000, history in history_strategy(SIZES), player in 0usize..3) {
        let game = random_game(SIZES, seed);
        let k = game.num_actions(player);
        let mut internal = InternalRegretState::new(&game, player);
        let mut external = ExternalRegretState::new(&game, player);
        let mut tally = RegretTally::new(&game, player);
        for p in &history {
            internal.update(&game, p).unwrap();
            external.update(&game, p).unwrap();
            tally.record(&game, game.profile_index(p));
        }
        let range = game.utility_range(player);
        for a in 0..k {
            prop_assert_eq!(internal.regret(a, a), 0.0);
            let mut column = 0.0;
            for b in 0..k {
                prop_assert!((internal.regret(a, b) - tally.pairwise(a, b)).abs() < 1e-12);
                prop_assert!(internal.regret(a, b).abs() <= range + 1e-12);
                column += tally.pairwise(b, a);
            }
            // external regret toward `a` splits over the actions actually played
            prop_assert!((external.regret_vector()[a] - column).abs() < 1e-12);
        }
        let m = measure_regrets(&game, &history, player).unwrap();
        prop_assert!(m.internal >= 0.0);
        prop_assert!((m.internal - internal.max_regret()).abs() < 1e-12);
        prop_assert!(m.external <= (k as f64 - 1.0) * m.internal + 1e-12);
    }

    #[test]
    fn counts_sum_to_elapsed_rounds(seed in 0u64..1000, rounds in 1usize..300, t_frac in 0.0f64..1.0) {
        let game = random_game(&[2, 2, 2], seed);
        let traj = play(&game, &LearnerSpec::new(LearnerKind::InternalRegretMatching), &MixedStrategy::uniform(2, 2), rounds, seed);
        let t = 1 + ((rounds - 1) as f64 * t_frac) as usize;
        for players in [&[0][..], &[0, 1], &[0, 1, 2], &[1, 2]] {
            let counts = empirical_counts(&traj, players, t).unwrap();
            prop_assert_eq!(counts.iter().sum::<u64>(), t as u64);
        }
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let game = random_game(&[3, 2, 2], 5);
    for kind in [LearnerKind::InternalRegretMatching, LearnerKind::ExternalRegretMatching] {
        let spec = LearnerSpec::new(kind);
        let alpha = MixedStrategy::uniform(2, 2);
        let a = play(&game, &spec, &alpha, 2000, 11);
        let b = play(&game, &spec, &alpha, 2000, 11);
        let c = play(&game, &spec, &alpha, 2000, 12);
        assert_eq!(a.profile_indices(), b.profile_indices());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a.profile_indices(), c.profile_indices());
    }
}

#[test]
fn internal_regret_vanishes_on_random_games() {
    let spec = LearnerSpec::new(LearnerKind::InternalRegretMatching);
    for game_seed in 1..=3 {
        let game = random_game(&[2, 2, 2], game_seed);
        let alpha = MixedStrategy::uniform(2, 2);
        for seed in 1..=20 {
            let traj = play(&game, &spec, &alpha, 100_000, seed);
            let history: Vec<Vec<usize>> = traj.profiles().collect();
            for player in 0..2 {
                let r = measure_regrets(&game, &history, player).unwrap();
                assert!(r.internal < 0.02, "game {game_seed} seed {seed} p{}: {}", player + 1, r.internal);
            }
        }
    }
}

#[test]
fn switching_rule_with_inertia_also_learns() {
    // explicit mu selects the inertia form even for two actions
    let game = random_game(&[2, 2, 2], 1);
    let alpha = MixedStrategy::uniform(2, 2);
    let mu = 2.0 * game.utility_range(0).max(game.utility_range(1));
    let inertia = LearnerSpec {
        mu: Some(mu),
        ..LearnerSpec::new(LearnerKind::InternalRegretMatching)
    };
    let plain = LearnerSpec::new(LearnerKind::InternalRegretMatching);
    let mut worst = [0.0f64; 2];
    for seed in 1..=10 {
        for (slot, spec) in [&plain, &inertia].into_iter().enumerate() {
            let traj = play(&game, spec, &alpha, 50_000, seed);
            let history: Vec<Vec<usize>> = traj.profiles().collect();
            for player in 0..2 {
                let r = measure_regrets(&game, &history, player).unwrap().internal;
                worst[slot] = worst[slot].max(r);
            }
        }
    }
    assert!(worst[0] < 0.02, "two-action rule: {}", worst[0]);
    assert!(worst[1] < 0.05, "inertia rule: {}", worst[1]);
}

#[test]
fn distance_to_correlated_set_does_not_grow_on_ce2() {
    let game = ce2_extended_game();
    let alpha = MixedStrategy::pure(2, 2, 0);
    let spec = LearnerSpec::new(LearnerKind::InternalRegretMatching);
    let checkpoints = [1_000, 10_000, 50_000];
    for seed in 1..=20 {
        let traj = play(&game, &spec, &alpha, 50_000, seed);
        let m = compute_metrics(&traj, &alpha, &checkpoints).unwrap();
        for w in m.records.windows(2) {
            assert!(w[1].dist_ced <= w[0].dist_ced + 1e-9, "seed {seed}: {:?}", m.records);
        }
        assert!(m.records.last().unwrap().dist_ced < 0.05);
    }
}
