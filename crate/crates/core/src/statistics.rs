//! Per-build summaries (profiles, path lengths, good/bad vertices) and
//! cross-replication estimators.

use crate::distributions::AnalyticConstants;
use crate::numeric::normal_cdf;
use crate::tree::{BuildMode, Tree, VertexId};
use crate::{Error, Result};

/// Default half-width exponent for the good strip, `ln^(0.5 + eps) n`.
pub const DEFAULT_EPSILON: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeStatistics {
    pub n: u64,
    /// Number of vertices `N`.
    pub vertices: u64,
    /// Vertex count per depth.
    pub profile: Vec<u64>,
    /// Ball count per depth.
    pub ball_profile: Vec<u64>,
    /// Final depth of the last inserted ball, `D_n` (traced builds).
    pub last_depth: Option<u32>,
    /// Average ball depth, `D_n*` (traced builds).
    pub mean_depth: Option<f64>,
    /// Sum of ball depths.
    pub psi: u64,
    /// Sum of vertex depths.
    pub upsilon: u64,
    pub epsilon: f64,
    pub good: u64,
    pub bad: u64,
    /// `sum_v (d(v) - ln(n)/mu)^2`.
    pub sum_sq_dev: f64,
    pub height: u32,
}

/// Depth strip `[ln(n)/mu - ln^(0.5+eps) n, ln(n)/mu + ln^(0.5+eps) n]`.
pub fn good_strip(n: u64, mu: f64, epsilon: f64) -> (f64, f64) {
    let ln_n = (n as f64).ln();
    let half = ln_n.powf(0.5 + epsilon);
    (ln_n / mu - half, ln_n / mu + half)
}

pub fn summarize(tree: &Tree, constants: &AnalyticConstants, epsilon: f64) -> Result<TreeStatistics> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = tree.n_balls();
    let height = tree.height() as usize;
    let mut profile = vec![0u64; height + 1];
    let mut ball_profile = vec![0u64; height + 1];
    let (lo, hi) = good_strip(n, constants.mu, epsilon);
    let centre = (n as f64).ln() / constants.mu;
    let (mut good, mut sum_sq_dev) = (0u64, 0.0);
    for (_, v) in tree.vertices() {
        let d = v.depth() as usize;
        profile[d] += 1;
        ball_profile[d] += u64::from(v.ball_count());
        let df = d as f64;
        if lo <= df && df <= hi {
            good += 1;
        }
        sum_sq_dev += (df - centre).powi(2);
    }
    let psi: u64 = ball_profile.iter().enumerate().map(|(d, &c)| d as u64 * c).sum();
    let upsilon: u64 = profile.iter().enumerate().map(|(d, &c)| d as u64 * c).sum();

    let counts = tree.subtree_ball_counts();
    let via_subtrees: u64 = counts.iter().skip(1).sum();
    if via_subtrees != psi {
        return Err(Error::Unreachable(format!(
            "ball path length {psi} disagrees with subtree sizes {via_subtrees}"
        )));
    }

    let (last_depth, mean_depth) = if tree.mode().traced() {
        let last = tree.ball_location(n as usize - 1).map(|v| tree.vertex(v).depth());
        (last, Some(psi as f64 / n as f64))
    } else {
        (None, None)
    };
    let vertices = tree.num_vertices() as u64;
    Ok(TreeStatistics {
        n,
        vertices,
        profile,
        ball_profile,
        last_depth,
        mean_depth,
        psi,
        upsilon,
        epsilon,
        good,
        bad: vertices - good,
        sum_sq_dev,
        height: height as u32,
    })
}

/// Ball path length equals the sum of non-root subtree ball counts, and
/// vertex path length the sum of non-root subtree vertex counts.
pub fn path_length_identity_check(tree: &Tree) -> bool {
    let psi: u64 = tree.vertices().map(|(_, v)| u64::from(v.depth()) * u64::from(v.ball_count())).sum();
    let upsilon: u64 = tree.vertices().map(|(_, v)| u64::from(v.depth())).sum();
    let balls: u64 = tree.subtree_ball_counts().iter().skip(1).sum();
    let verts: u64 = tree.subtree_vertex_counts().iter().skip(1).sum();
    psi == balls && upsilon == verts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub depth: u32,
    pub vertices: usize,
    pub violations: usize,
    /// `violations / vertices`.
    pub fraction: f64,
    /// `n^0.6`.
    pub threshold: f64,
}

/// Share of depth-`d` vertices whose subtree ball count is further than
/// `n^0.6` from `n` times the vertex's cumulative weight.
pub fn concentration_report(tree: &Tree, depth: u32) -> Result<ConcentrationReport> {
    if tree.mode() != BuildMode::Instrumented {
        return Err(Error::InvalidArgument("concentration needs an instrumented build".into()));
    }
    let n = tree.n_balls() as f64;
    let threshold = n.powf(0.6);
    let counts = tree.subtree_ball_counts();
    let (mut vertices, mut violations) = (0, 0);
    for (id, v) in tree.vertices() {
        if v.depth() != depth {
            continue;
        }
        vertices += 1;
        let w = v.cumulative_weight().expect("instrumented vertex has a weight");
        if (counts[id.index()] as f64 - n * w).abs() > threshold {
            violations += 1;
        }
    }
    if vertices == 0 {
        return Err(Error::EmptyDepth(depth));
    }
    Ok(ConcentrationReport { depth, vertices, violations, fraction: violations as f64 / vertices as f64, threshold })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeSums {
    /// `L = floor(beta * log_b ln n)`.
    pub depth: u32,
    /// Subtrees rooted at depth `L` that entered the sums (`n_i > s`).
    pub subtrees: usize,
    /// Ball counts `n_i` of those subtrees.
    pub subtree_sizes: Vec<u64>,
    /// `sum_i sum_{v in T_i} (d_i(v) - ln(n_i)/mu)^2 / (mu^-3 ln^3 n_i)`.
    pub corollary_sum: f64,
    /// `sum_i Upsilon(T_i) / (mu^-2 ln^2 n_i)`.
    pub upsilon_sum: f64,
    /// `sigma^2 alpha n / ln^2 n`.
    pub corollary_prediction: f64,
    /// Leading term `sum_i alpha n_i / (mu^-1 ln n_i)` of the upsilon sum.
    pub upsilon_leading: f64,
}

/// Normalised sums over the subtrees rooted at depth `L = floor(beta log_b ln n)`.
/// Subtrees holding at most `s` balls are excluded.
pub fn subtree_sums(tree: &Tree, beta: f64, constants: &AnalyticConstants, alpha: f64) -> Result<SubtreeSums> {
    let n = tree.n_balls();
    let params = tree.params();
    let ln_n = (n as f64).ln();
    let level = beta * ln_n.ln() / f64::from(params.b).ln();
    if !(level >= 1.0) {
        return Err(Error::InvalidArgument(format!("subtree depth L = floor({level:.3}) < 1")));
    }
    let depth = level.floor() as u32;
    let mu = constants.mu;

    let counts = tree.subtree_ball_counts();
    let nv = tree.num_vertices();
    let mut anchor = vec![u32::MAX; nv];
    let mut per_root: Vec<(VertexId, f64, f64)> = Vec::new(); // (root, sq-dev sum, upsilon)
    let mut root_index = vec![u32::MAX; nv];
    for (id, v) in tree.vertices() {
        let a = if v.depth() == depth {
            id.0
        } else if v.depth() > depth {
            anchor[v.parent().expect("deep vertex has a parent").index()]
        } else {
            continue;
        };
        anchor[id.index()] = a;
        if a == u32::MAX || counts[a as usize] <= u64::from(params.s) {
            continue;
        }
        if root_index[a as usize] == u32::MAX {
            root_index[a as usize] = per_root.len() as u32;
            per_root.push((VertexId(a), 0.0, 0.0));
        }
        let entry = &mut per_root[root_index[a as usize] as usize];
        let local = f64::from(v.depth() - depth);
        let centre = (counts[a as usize] as f64).ln() / mu;
        entry.1 += (local - centre).powi(2);
        entry.2 += local;
    }

    let (mut corollary_sum, mut upsilon_sum, mut upsilon_leading) = (0.0, 0.0, 0.0);
    let mut subtree_sizes = Vec::with_capacity(per_root.len());
    for &(root, sq, ups) in &per_root {
        let ni = counts[root.index()];
        let l = (ni as f64).ln();
        corollary_sum += sq / (l.powi(3) / mu.powi(3));
        upsilon_sum += ups / (l * l / (mu * mu));
        upsilon_leading += alpha * ni as f64 * mu / l;
        subtree_sizes.push(ni);
    }
    Ok(SubtreeSums {
        depth,
        subtrees: per_root.len(),
        subtree_sizes,
        corollary_sum,
        upsilon_sum,
        corollary_prediction: constants.sigma2 * alpha * n as f64 / (ln_n * ln_n),
        upsilon_leading,
    })
}

/// One replication, as stored in a CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep: u64,
    pub seed: u64,
    pub family: String,
    pub n: u64,
    pub vertices: u64,
    pub height: u32,
    pub last_depth: Option<u32>,
    pub mean_depth: Option<f64>,
    pub psi: u64,
    pub upsilon: u64,
    pub bad: u64,
    pub epsilon: f64,
}

impl ReplicationRecord {
    pub fn from_stats(stats: &TreeStatistics, rep: u64, seed: u64, family: impl Into<String>) -> Self {
        Self {
            rep,
            seed,
            family: family.into(),
            n: stats.n,
            vertices: stats.vertices,
            height: stats.height,
            last_depth: stats.last_depth,
            mean_depth: stats.mean_depth,
            psi: stats.psi,
            upsilon: stats.upsilon,
            bad: stats.bad,
            epsilon: stats.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0) } else { 0.0 };
        Self { mean, se: (var / r).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub family: String,
    pub n: u64,
    pub replications: usize,
    /// Seed of the first replication.
    pub seed: u64,
    pub vertices_over_n: MeanSe,
    pub last_depth: Option<MeanSe>,
    /// Unbiased sample variance of `D_n` with its delta-method standard error.
    pub var_last_depth: Option<MeanSe>,
    pub mean_depth: Option<MeanSe>,
    pub psi_over_n: MeanSe,
    pub upsilon_over_n: MeanSe,
    pub bad_fraction: MeanSe,
    pub alpha_hat: f64,
    pub q_hat: MeanSe,
    pub r_hat: MeanSe,
    /// Reported only: sample `Var(N) / n^2`.
    pub var_vertices_over_n2: f64,
    /// Sup distance between the standardised `D_n` sample and `N(0, 1)`.
    pub ks_statistic: Option<f64>,
}

pub fn aggregate(records: &[ReplicationRecord], constants: &AnalyticConstants) -> Result<ReplicationSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no replications to aggregate".into()))?;
    if records.len() < 2 {
        return Err(Error::InvalidArgument("aggregation needs at least 2 replications".into()));
    }
    for r in records {
        if r.n != first.n || r.family != first.family || r.epsilon != first.epsilon {
            return Err(Error::MixedConfigurations(format!(
                "({}, n={}, eps={}) vs ({}, n={}, eps={})",
                first.family, first.n, first.epsilon, r.family, r.n, r.epsilon
            )));
        }
    }
    let n = first.n as f64;
    let ln_n = n.ln();
    let mu = constants.mu;
    let col = |f: &dyn Fn(&ReplicationRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();

    let vertices_over_n = MeanSe::of(&col(&|r| r.vertices as f64 / n));
    let alpha_hat = vertices_over_n.mean;
    let psi_over_n = MeanSe::of(&col(&|r| r.psi as f64 / n));
    let upsilon_over_n = MeanSe::of(&col(&|r| r.upsilon as f64 / n));
    let bad_fraction = MeanSe::of(&col(&|r| r.bad as f64 / r.vertices as f64));
    let q_hat = MeanSe { mean: psi_over_n.mean - ln_n / mu, se: psi_over_n.se };
    let r_hat = MeanSe::of(&col(&|r| (r.upsilon as f64 - ln_n / mu * r.vertices as f64) / n));

    let vn = col(&|r| r.vertices as f64);
    let mean_vn = vn.iter().sum::<f64>() / vn.len() as f64;
    let var_vertices_over_n2 = vn.iter().map(|x| (x - mean_vn).powi(2)).sum::<f64>() / (vn.len() as f64 - 1.0) / (n * n);

    let depths: Option<Vec<f64>> = records.iter().map(|r| r.last_depth.map(f64::from)).collect();
    let (last_depth, var_last_depth, ks_statistic) = match depths {
        Some(d) => {
            let scale = (constants.sigma2 / mu.powi(3) * ln_n).sqrt();
            let z: Vec<f64> = d.iter().map(|x| (x - ln_n / mu) / scale).collect();
            let ks = (scale > 0.0).then(|| ks_normal(&z));
            (Some(MeanSe::of(&d)), Some(variance_with_se(&d)), ks)
        }
        None => (None, None, None),
    };
    let mean_depth = records
        .iter()
        .map(|r| r.mean_depth)
        .collect::<Option<Vec<f64>>>()
        .map(|v| MeanSe::of(&v));

    Ok(ReplicationSummary {
        family: first.family.clone(),
        n: first.n,
        replications: records.len(),
        seed: first.seed,
        vertices_over_n,
        last_depth,
        var_last_depth,
        mean_depth,
        psi_over_n,
        upsilon_over_n,
        bad_fraction,
        alpha_hat,
        q_hat,
        r_hat,
        var_vertices_over_n2,
        ks_statistic,
    })
}

/// Unbiased sample variance, with standard error `sqrt((m4 - s^4 (R-3)/(R-1)) / R)`.
pub fn variance_with_se(xs: &[f64]) -> MeanSe {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let s2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
    let v = (m4 - s2 * s2 * (r - 3.0) / (r - 1.0)) / r;
    MeanSe { mean: s2, se: v.max(0.0).sqrt() }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `xs` and the
/// standard normal CDF; exact sup, ties handled as jumps.
pub fn ks_normal(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = normal_cdf(x);
        sup = sup.max((i as f64 / r - f).abs()).max((j as f64 / r - f).abs());
        i = j;
    }
    sup
}
