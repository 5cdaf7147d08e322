//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use mlrepair_core::fuzz::{random_call, random_edit, random_program};
use mlrepair_core::harness::{load_corpus, BugEntry};
use mlrepair_core::lang::{Call, Program};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus"))
}

pub fn corpus() -> Vec<BugEntry> {
    load_corpus(&corpus_dir()).expect("corpus loads")
}

pub fn bug(id: &str) -> BugEntry {
    corpus().into_iter().find(|b| b.id == id).expect("bug exists")
}

/// `n` random programs with one call each, reproducible from `seed`.
pub fn programs_with_calls(seed: u64, n: usize) -> Vec<(Program, Call)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = random_program(&mut rng);
            let c = random_call(&p, &mut rng);
            (p, c)
        })
        .collect()
}

/// `n` random base/edited program pairs, reproducible from `seed`.
pub fn edit_pairs(seed: u64, n: usize) -> Vec<(Program, Program)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = random_program(&mut rng);
            let q = random_edit(&p, &mut rng);
            (p, q)
        })
        .collect()
}
