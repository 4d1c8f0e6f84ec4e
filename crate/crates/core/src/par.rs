//! Chunked data-parallel evaluation.
//!
//! Work is split into a fixed number of chunks whose seeds depend only on the
//! base seed and the chunk index, and results come back in chunk order. The
//! outcome is therefore identical whether chunks run on rayon workers (the
//! default `parallel` feature) or sequentially.

use std::cell::Cell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Number of trials handled by one chunk.
pub const CHUNK: usize = 1024;

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named sub-stream of `seed`.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

thread_local! {
    static SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `body` with every [`map_indexed`] call on this thread evaluated
/// sequentially, as without the `parallel` feature.
pub fn sequential<R>(body: impl FnOnce() -> R) -> R {
    let before = SEQUENTIAL.with(|c| c.replace(true));
    let out = body();
    SEQUENTIAL.with(|c| c.set(before));
    out
}

/// Evaluates `f(i)` for `i in 0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !SEQUENTIAL.with(Cell::get) {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Splits `trials` into chunks of [`CHUNK`] and runs `f(rng, chunk_index, len)`
/// on each with a per-chunk generator derived from `seed`.
pub fn chunks<T, F>(seed: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, usize, usize) -> T + Sync + Send,
{
    let n = trials.div_ceil(CHUNK);
    map_indexed(n, |i| {
        let len = CHUNK.min(trials - i * CHUNK);
        let mut r = rng(derive(seed, i as u64));
        f(&mut r, i, len)
    })
}
