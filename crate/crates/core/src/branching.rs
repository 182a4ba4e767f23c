//! Weighted branching process on the skeleton tree: the root carries `n`,
//! and each child carries its parent's weight times its split component.
//! Counting vertices with weight at least `K` is a ball-free Monte Carlo
//! check of the renewal prediction `U(ln(n/K)) + 1`.

use rand::{Rng, SeedableRng};

use crate::distributions::SplitVectorSource;
use crate::tree::SimRng;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeavyCountResult {
    /// Vertices with `n * prod W >= K`.
    pub count: u64,
    pub max_depth_reached: u32,
    /// Split vectors sampled.
    pub expansions: u64,
}

/// Depth-first count of skeleton vertices whose weight is at least `k`.
/// Components are at most one, so weights never increase along a path and
/// a vertex below `k` closes its whole subtree.
pub fn count_heavy<R: Rng>(source: &SplitVectorSource, n: f64, k: f64, rng: &mut R) -> Result<HeavyCountResult> {
    let b = source.branch_factor();
    let mut result = HeavyCountResult { count: 0, max_depth_reached: 0, expansions: 0 };
    if !(n >= k) {
        return Ok(result);
    }
    let mut stack: Vec<(f64, u32)> = vec![(n, 0)];
    let mut split = vec![0.0; b];
    while let Some((weight, depth)) = stack.pop() {
        result.count += 1;
        result.max_depth_reached = result.max_depth_reached.max(depth);
        source.sample_into(rng, &mut split)?;
        result.expansions += 1;
        for &v in &split {
            let child = weight * v;
            if child >= k {
                stack.push((child, depth + 1));
            }
        }
    }
    Ok(result)
}

/// [`count_heavy`] on a fresh stream seeded by `seed`.
pub fn count_heavy_seeded(source: &SplitVectorSource, n: f64, k: f64, seed: u64) -> Result<HeavyCountResult> {
    count_heavy(source, n, k, &mut SimRng::seed_from_u64(seed))
}
