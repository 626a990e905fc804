//! Seeded inputs for the benchmarks.

use radul_core::cyclic_index::SymMat;
use radul_core::rng::{random_symbol, rng, Budget};
use radul_core::samples::{dense, tuples};
use radul_core::symbol_algebra::{FormalSymbol, HeisenbergContext};

/// Two random order-0 symbols truncated at `−ν − 4`.
pub fn symbol_pair(ctx: &HeisenbergContext, seed: u64) -> (FormalSymbol, FormalSymbol) {
    let mut r = rng(seed);
    let cutoff = -ctx.nu() - 4;
    (random_symbol(ctx, 0, cutoff, &dense(), &mut r), random_symbol(ctx, 0, cutoff, &dense(), &mut r))
}

pub fn tuple(ctx: &HeisenbergContext, len: usize, seed: u64) -> Vec<SymMat> {
    tuples(ctx, 1, len, &Budget::rich(), seed).remove(0)
}
