//! Browser bindings: one tree's depth profile, renewal curves and the heavy
//! vertex count. Every export takes plain numbers and strings and returns a
//! JSON document; errors come back as `{"error": "..."}`.

use serde_json::{json, Value};
use splittree::branching::count_heavy_seeded;
use splittree::experiment::derive_seed;
use splittree::families::Family;
use splittree::renewal::{expected_heavy_count, solve_split_renewal, Grid};
use splittree::statistics::{good_strip, summarize, MeanSe, DEFAULT_EPSILON};
use splittree::tree::build;
use splittree::{BuildMode, FamilySpec};
use wasm_bindgen::prelude::*;

/// Largest tree the page will build.
pub const MAX_N: u64 = 2_000_000;
/// Grid points kept in a returned curve.
const CURVE_POINTS: usize = 600;

fn spec(family: &str) -> Result<FamilySpec, String> {
    let family: Family = family.trim().parse().map_err(|e: splittree::Error| e.to_string())?;
    family.spec().map_err(|e| e.to_string())
}

fn to_json(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Vertex and ball counts per depth of one traced build.
pub fn depth_profile_value(family: &str, n: u64, seed: u64) -> Result<Value, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n must be in 1..={MAX_N}"));
    }
    let spec = spec(family)?;
    let tree = build(spec.params, &spec.source, n, seed, BuildMode::Traced).map_err(|e| e.to_string())?;
    let stats = summarize(&tree, &spec.constants, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
    let ln_n = (n as f64).ln();
    let (lo, hi) = good_strip(n, spec.constants.mu, DEFAULT_EPSILON);
    Ok(json!({
        "family": family.trim(),
        "n": n,
        "seed": seed,
        "mu": spec.constants.mu,
        "sigma2": spec.constants.sigma2,
        "vertices": stats.vertices,
        "height": stats.height,
        "last_depth": stats.last_depth,
        "mean_depth": stats.mean_depth,
        "predicted_depth": ln_n / spec.constants.mu,
        "good_strip": [lo, hi],
        "bad_fraction": stats.bad as f64 / stats.vertices as f64,
        "vertex_profile": stats.profile,
        "ball_profile": stats.ball_profile,
    }))
}

/// `e^-t U(t)` and `W(t)` on a thinned grid, with their limits.
pub fn renewal_curves_value(family: &str, h: f64, t_max: f64) -> Result<Value, String> {
    let spec = spec(family)?;
    if spec.lattice_suspect {
        return Err(format!("{} is lattice_suspect: renewal limits do not apply", family.trim()));
    }
    let grid = Grid::new(h, t_max).map_err(|e| e.to_string())?;
    if grid.len() > 200_000 {
        return Err("grid too fine for the browser (over 200000 points)".into());
    }
    let sol = solve_split_renewal(&spec.source, grid).map_err(|e| e.to_string())?;
    let stride = grid.len().div_ceil(CURVE_POINTS).max(1);
    let mut idx: Vec<usize> = (0..grid.len()).step_by(stride).collect();
    if idx.last() != Some(&(grid.len() - 1)) {
        idx.push(grid.len() - 1);
    }
    let k = spec.constants;
    Ok(json!({
        "family": family.trim(),
        "t": idx.iter().map(|&i| grid.t(i)).collect::<Vec<_>>(),
        "u_hat": idx.iter().map(|&i| sol.u_hat[i]).collect::<Vec<_>>(),
        "w": idx.iter().map(|&i| sol.w[i]).collect::<Vec<_>>(),
        "u_hat_limit": 1.0 / k.mu,
        "w_limit": (k.sigma2 - k.mu * k.mu) / (2.0 * k.mu * k.mu) - 1.0 / k.mu,
    }))
}

/// Monte Carlo count of skeleton vertices with weight at least `k`, next to
/// the renewal prediction and the first-order limit `n / (k mu)`.
pub fn heavy_count_value(family: &str, n: f64, k: f64, runs: u32, seed: u64) -> Result<Value, String> {
    if !(k >= 1.0 && n >= k && n / k <= 1e6) {
        return Err("need 1 <= K <= n and n/K <= 1e6".into());
    }
    if runs < 2 {
        return Err("need at least two runs".into());
    }
    let spec = spec(family)?;
    let counts = (0..runs)
        .map(|r| {
            count_heavy_seeded(&spec.source, n, k, derive_seed(seed, n as u64, u64::from(r)))
                .map(|c| c.count as f64)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mc = MeanSe::of(&counts);
    let renewal = if spec.lattice_suspect {
        None
    } else {
        let t_max = ((n / k).ln() + 1.0).ceil().max(2.0);
        let sol = solve_split_renewal(&spec.source, Grid::new(1e-3, t_max).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        Some(expected_heavy_count(&sol, n, k).map_err(|e| e.to_string())?)
    };
    Ok(json!({
        "family": family.trim(),
        "n": n,
        "K": k,
        "runs": runs,
        "mc_mean": mc.mean,
        "mc_se": mc.se,
        "renewal": renewal,
        "limit": n / k / spec.constants.mu,
    }))
}

#[wasm_bindgen]
pub fn depth_profile(family: &str, n: f64, seed: f64) -> String {
    to_json(depth_profile_value(family, n as u64, seed as u64))
}

#[wasm_bindgen]
pub fn renewal_curves(family: &str, h: f64, t_max: f64) -> String {
    to_json(renewal_curves_value(family, h, t_max))
}

#[wasm_bindgen]
pub fn heavy_count(family: &str, n: f64, k: f64, runs: u32, seed: f64) -> String {
    to_json(heavy_count_value(family, n, k, runs, seed as u64))
}
