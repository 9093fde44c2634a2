//! Built-in games: the two three-player counterexample games (two
//! coordinating learners, one optimizer action `E`), an extension of the
//! second with a genuine optimizer choice, and seeded random games.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game::GameSpec;

fn labels(sets: &[&[&str]]) -> Vec<Vec<String>> {
    sets.iter()
        .map(|s| s.iter().map(|l| l.to_string()).collect())
        .collect()
}

/// Builds a game from payoff triples listed in profile order.
fn from_triples(actions: &[&[&str]], cells: &[[f64; 3]]) -> GameSpec {
    let utilities = (0..3).map(|p| cells.iter().map(|c| c[p]).collect()).collect();
    GameSpec::new(labels(actions), utilities).expect("fixture game is well formed")
}

/// Learners `{T,B}` x `{L,R}`, optimizer `{E}`:
///
/// ```text
///        L           R
/// T   (1,1, 0)   (0,0,0)
/// B   (0,0,-1)   (1,1,1)
/// ```
pub fn ce1_game() -> GameSpec {
    from_triples(
        &[&["T", "B"], &["L", "R"], &["E"]],
        &[
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
            [1.0, 1.0, 1.0],
        ],
    )
}

/// Same learners and shape as [`ce1_game`]:
///
/// ```text
///        L           R
/// T   (1,1, 0)   (0,0,1)
/// B   (0,0,-1)   (1,1,0)
/// ```
pub fn ce2_game() -> GameSpec {
    from_triples(
        &[&["T", "B"], &["L", "R"], &["E"]],
        &[
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
            [1.0, 1.0, 0.0],
        ],
    )
}

/// [`ce2_game`] with a second optimizer action `F` under which the
/// learners anti-coordinate:
///
/// ```text
///  F      L           R
/// T   (0,0, 1)   (1,1,-1)
/// B   (1,1, 0)   (0,0, 1)
/// ```
pub fn ce2_extended_game() -> GameSpec {
    from_triples(
        &[&["T", "B"], &["L", "R"], &["E", "F"]],
        &[
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, -1.0],
            [0.0, 0.0, -1.0],
            [1.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ],
    )
}

/// Game with the given action counts and utilities drawn uniformly from
/// `[-1, 1)` by a ChaCha generator seeded with `seed`.
pub fn random_game(sizes: &[usize], seed: u64) -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: usize = sizes.iter().product();
    let utilities = (0..sizes.len())
        .map(|_| (0..profiles).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    GameSpec::from_sizes(sizes, utilities).expect("random game is well formed")
}
