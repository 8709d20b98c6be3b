#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vygotsky::Leaderboard;

pub const FIXTURE_MODELS: usize = 40;
pub const FIXTURE_TASKS: usize = 8;
pub const NOISE_SD: f64 = 0.02;

pub fn normalized_board(scores: Vec<Vec<f64>>) -> Leaderboard {
    let n_models = scores.len();
    let n_tasks = scores[0].len();
    Leaderboard::new(
        (0..n_models).map(|i| format!("m{i}")).collect(),
        (0..n_tasks).map(|t| format!("t{t}")).collect(),
        scores,
        vec!["score".into(); n_tasks],
    )
    .unwrap()
    .assume_normalized()
    .unwrap()
}

/// Public tasks 0..4 are uniform on [0.1, 0.9]; private task `4 + j` copies
/// public task `j` plus N(0, 0.02) noise, clamped to [0, 1].
pub fn signal_board(seed: u64) -> Leaderboard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SD).unwrap();
    let half = FIXTURE_TASKS / 2;
    let scores = (0..FIXTURE_MODELS)
        .map(|_| {
            let public: Vec<f64> = (0..half).map(|_| rng.random_range(0.1..0.9)).collect();
            let private: Vec<f64> = public
                .iter()
                .map(|v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            public.into_iter().chain(private).collect()
        })
        .collect();
    normalized_board(scores)
}

/// `n_models × n_tasks` independent uniform scores.
pub fn uniform_board(n_models: usize, n_tasks: usize, seed: u64) -> Leaderboard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normalized_board(
        (0..n_models)
            .map(|_| (0..n_tasks).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect(),
    )
}
