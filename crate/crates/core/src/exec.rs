//! Deterministic trial execution, parallel when the `parallel` feature is on.
//!
//! Trials are split into fixed-size blocks. Block `i` draws from its own
//! ChaCha stream seeded with [`mix_seed`]`(seed, i)`, so the result depends
//! only on `(seed, trials)` and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trials per independently seeded block.
pub const BLOCK_TRIALS: u64 = 4096;

/// How to schedule independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derived seed for stream `index` of a run seeded with `seed`:
/// `splitmix64(seed ⊕ splitmix64(index))`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, index))
}

fn block_count<F>(seed: u64, trials: u64, block: u64, trial: &F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool,
{
    let start = block * BLOCK_TRIALS;
    let len = BLOCK_TRIALS.min(trials - start);
    let mut rng = stream(seed, block);
    (0..len).filter(|_| trial(&mut rng)).count() as u64
}

/// Runs `trials` Bernoulli trials and returns how many came out `true`.
pub fn count_successes<F>(trials: u64, seed: u64, exec: Execution, trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..blocks)
                .into_par_iter()
                .map(|b| block_count(seed, trials, b, &trial))
                .sum()
        }
        _ => (0..blocks).map(|b| block_count(seed, trials, b, &trial)).sum(),
    }
}

/// Maps `f` over `items`, keeping input order in the output.
pub fn map_ordered<T, U, F>(items: &[T], exec: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
        }
        _ => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
    }
}
