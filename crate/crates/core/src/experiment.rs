//! Seeding and replication.
//!
//! Every replication derives its own seed from `(base_seed, n, index)`, runs
//! in isolation, and results come back in index order, so serial and
//! concurrent runs of one configuration agree exactly.

use crate::families::FamilySpec;
use crate::statistics::{summarize, ReplicationRecord, TreeStatistics};
use crate::tree::{build, BuildMode};
use crate::Result;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at size `n`.
///
/// `h0 = mix(base + G)`, `h1 = mix(h0 ^ (n + 2G))`, `seed = mix(h1 ^ (rep + 3G))`
/// with `G = 0x9E3779B97F4A7C15` and the SplitMix64 finalizer
/// `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`
/// (all arithmetic wrapping mod 2^64).
pub fn derive_seed(base_seed: u64, n: u64, rep: u64) -> u64 {
    let h = mix64(base_seed.wrapping_add(GOLDEN_GAMMA));
    let h = mix64(h ^ n.wrapping_add(GOLDEN_GAMMA.wrapping_mul(2)));
    mix64(h ^ rep.wrapping_add(GOLDEN_GAMMA.wrapping_mul(3)))
}

/// Run `job(rep, seed)` for `rep in 0..replications`, results in `rep` order.
/// `workers = None` uses every available core.
pub fn replicate<T, F>(base_seed: u64, n: u64, replications: usize, workers: Option<usize>, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync + Send,
{
    let run = |rep: usize| job(rep as u64, derive_seed(base_seed, n, rep as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers != Some(1) {
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                pool = pool.num_threads(w);
            }
            let pool = pool
                .build()
                .map_err(|e| crate::Error::InvalidArgument(format!("thread pool: {e}")))?;
            return pool.install(|| (0..replications).into_par_iter().map(run).collect());
        }
    }
    let _ = workers;
    (0..replications).map(run).collect()
}

/// Build and summarise `replications` trees of `family` at size `n`.
pub fn simulate(
    family: &FamilySpec,
    label: &str,
    n: u64,
    replications: usize,
    base_seed: u64,
    mode: BuildMode,
    epsilon: f64,
    workers: Option<usize>,
) -> Result<Vec<(ReplicationRecord, TreeStatistics)>> {
    replicate(base_seed, n, replications, workers, |rep, seed| {
        let tree = build(family.params, &family.source, n, seed, mode)?;
        let stats = summarize(&tree, &family.constants, epsilon)?;
        Ok((ReplicationRecord::from_stats(&stats, rep, seed, label), stats))
    })
}
