//! Shared fixtures for the criterion benches in `benches/`.

use dgmg::hierarchy::build_hierarchy;
use dgmg::{Domain, LevelStack, PairField, ProblemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Unit-square hierarchy up to `level` for `beta`.
pub fn square_stack(beta: f64, level: usize) -> LevelStack {
    build_hierarchy(ProblemParams::new(Domain::UnitSquare, beta), level).expect("hierarchy")
}

pub fn random_pair(n: usize, seed: u64) -> PairField {
    PairField::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}
