//! Grid solvers for the split renewal equation `U = nu + U * d nu` and for
//! the ordinary renewal equation `Z = z + Z * dF`.
//!
//! `nu(t) = b P(-ln V <= t)` is not a probability measure, so the split
//! equation is solved in tilted form: with `U_hat(t) = e^-t U(t)` and
//! `d omega(t) = e^-t d nu(t)` (the law of `-ln Delta`, total mass one),
//! `U_hat = nu_hat + U_hat * d omega`, which forward substitution handles
//! stably. Convolutions use a trapezoidal Stieltjes rule, implicit in the
//! current grid value.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::{ConstantsMethod, SplitLaw, SplitVectorSource};
use crate::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_T_MAX: f64 = 15.0;
/// Samples binned onto the grid when `-ln V` has no closed-form CDF.
pub const EMPIRICAL_NU_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    step: f64,
    t_max: f64,
    points: usize,
}

impl Grid {
    pub fn new(step: f64, t_max: f64) -> Result<Self> {
        if !(step > 0.0 && t_max > 0.0 && step.is_finite() && t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid needs h > 0 and t_max > 0, got h={step}, t_max={t_max}")));
        }
        let cells = t_max / step;
        if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) {
            return Err(Error::InvalidArgument(format!("t_max / h = {cells} is not an integer")));
        }
        Ok(Self { step, t_max, points: cells.round() as usize + 1 })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.t(i))
    }

    /// Linear interpolation of grid samples at `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> Result<f64> {
        if !(0.0..=self.t_max * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::OutOfGrid { value: t, t_max: self.t_max });
        }
        let x = t / self.step;
        let i = (x.floor() as usize).min(self.points - 1);
        if i + 1 >= self.points {
            return Ok(values[self.points - 1]);
        }
        let frac = x - i as f64;
        Ok(values[i] * (1.0 - frac) + values[i + 1] * frac)
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::new(DEFAULT_STEP, DEFAULT_T_MAX).expect("default grid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalDiagnostics {
    /// Least-squares slope of `U_hat` over the last 10% of the grid.
    pub tail_slope: f64,
    /// Total mass of `omega` on the grid; one up to the tail beyond `t_max`.
    pub omega_mass: f64,
    /// Sample budget when `nu` was estimated empirically.
    pub nu_budget: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RenewalSolution {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub u_hat: Vec<f64>,
    /// `W(x) = int_0^x e^-t (U(t) - e^t / mu) dt`.
    pub w: Vec<f64>,
    pub mu_used: f64,
    pub diagnostics: RenewalDiagnostics,
}

impl RenewalSolution {
    pub fn u_at(&self, t: f64) -> Result<f64> {
        Ok(t.exp() * self.grid.interpolate(&self.u_hat, t)?)
    }

    pub fn u_hat_at(&self, t: f64) -> Result<f64> {
        self.grid.interpolate(&self.u_hat, t)
    }

    pub fn w_at(&self, t: f64) -> Result<f64> {
        self.grid.interpolate(&self.w, t)
    }
}

/// Solve the split renewal equation for `source` on `grid`.
pub fn solve_split_renewal(source: &SplitVectorSource, grid: Grid) -> Result<RenewalSolution> {
    if source.lattice_suspect() {
        return Err(Error::LatticeSuspect);
    }
    let b = source.branch_factor() as f64;
    let (nu, budget) = match source.law() {
        SplitLaw::Custom(c) if !c.has_closed_cdf() => (empirical_nu(source, grid, EMPIRICAL_NU_BUDGET)?, Some(EMPIRICAL_NU_BUDGET)),
        _ => (grid.times().map(|t| b * source.neg_log_v_cdf(t)).collect(), None),
    };
    let mu = source.constants(ConstantsMethod::Auto)?.mu;
    let mut solution = solve_split_renewal_nu(&nu, mu, grid)?;
    solution.diagnostics.nu_budget = budget;
    Ok(solution)
}

/// Solve from grid samples of `nu(t) = b P(-ln V <= t)`.
pub fn solve_split_renewal_nu(nu: &[f64], mu: f64, grid: Grid) -> Result<RenewalSolution> {
    if nu.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("nu has {} samples, grid has {}", nu.len(), grid.len())));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    check_monotone(nu, "nu")?;
    let h = grid.step();
    let nu_hat: Vec<f64> = nu.iter().enumerate().map(|(i, v)| (-grid.t(i)).exp() * v).collect();
    let mut omega = Vec::with_capacity(nu.len());
    omega.push(nu[0]);
    for j in 1..nu.len() {
        let weight = 0.5 * ((-grid.t(j - 1)).exp() + (-grid.t(j)).exp());
        omega.push((nu[j] - nu[j - 1]) * weight);
    }
    let u_hat = renewal_convolve(&nu_hat, &omega)?;
    let u: Vec<f64> = u_hat.iter().enumerate().map(|(i, v)| grid.t(i).exp() * v).collect();
    let limit = 1.0 / mu;
    let w = cumulative_trapezoid(&u_hat.iter().map(|v| v - limit).collect::<Vec<_>>(), h);
    let diagnostics = RenewalDiagnostics {
        tail_slope: tail_slope(&u_hat, h),
        omega_mass: omega.iter().sum(),
        nu_budget: None,
    };
    Ok(RenewalSolution { grid, u, u_hat, w, mu_used: mu, diagnostics })
}

fn empirical_nu(source: &SplitVectorSource, grid: Grid, budget: usize) -> Result<Vec<f64>> {
    let b = source.branch_factor();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0E_4E_3A_11);
    let mut hist = vec![0u64; grid.len()];
    let mut buf = vec![0.0; b];
    let mut drawn = 0usize;
    while drawn < budget {
        source.sample_into(&mut rng, &mut buf)?;
        for &v in buf.iter().take(budget - drawn) {
            drawn += 1;
            let y = if v > 0.0 { -v.ln() } else { f64::INFINITY };
            // sample lands at the first grid point at or above it
            let k = (y / grid.step()).ceil();
            if k < grid.len() as f64 {
                hist[k as usize] += 1;
            }
        }
    }
    let mut acc = 0u64;
    Ok(hist
        .iter()
        .map(|&c| {
            acc += c;
            b as f64 * acc as f64 / budget as f64
        })
        .collect())
}

/// Solves `X(t_i) = f_i + int_0^{t_i} X(t_i - u) d mass(u)` where `mass[0]`
/// is the atom at zero and `mass[j]` the mass of `((j-1)h, jh]`.
fn renewal_convolve(forcing: &[f64], mass: &[f64]) -> Result<Vec<f64>> {
    let n = forcing.len();
    let mut x = vec![0.0; n];
    let diag0 = 1.0 - mass[0];
    if !(diag0 > 0.0) {
        return Err(Error::Numerical("atom at zero carries all the mass".into()));
    }
    x[0] = forcing[0] / diag0;
    let half1 = 0.5 * mass.get(1).copied().unwrap_or(0.0);
    let diag = diag0 - half1;
    if !(diag > 0.0) {
        return Err(Error::Numerical("grid too coarse for the first mass cell".into()));
    }
    for i in 1..n {
        let mut acc = forcing[i] + half1 * x[i - 1];
        for j in 2..=i {
            acc += 0.5 * mass[j] * (x[i - j] + x[i - j + 1]);
        }
        x[i] = acc / diag;
    }
    Ok(x)
}

fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

fn tail_slope(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let start = n - (n / 10).max(2);
    let pts = &values[start..];
    let m = pts.len() as f64;
    let xs: Vec<f64> = (0..pts.len()).map(|i| i as f64 * h).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = pts.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(pts).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn check_monotone(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} is not finite at grid index {i}")));
    }
    if let Some(i) = values.windows(2).position(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::InvalidArgument(format!("{what} decreases at grid index {}", i + 1)));
    }
    Ok(())
}

/// `U(ln n - ln K) + 1`, the expected number of vertices with `n * prod W >= K`.
pub fn expected_heavy_count(solution: &RenewalSolution, n: f64, k: f64) -> Result<f64> {
    if !(k >= 1.0 && k <= n) {
        return Err(Error::InvalidArgument(format!("need 1 <= K <= n, got K = {k}, n = {n}")));
    }
    Ok(solution.u_at((n / k).ln())? + 1.0)
}

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `Z(t) = z(t) + int_0^t Z(t - u) dF(u)` for a probability CDF `F` on `[0, inf)`.
#[derive(Clone)]
pub struct GeneralRenewalProblem {
    pub z: RealFn,
    pub cdf: RealFn,
    pub mu: f64,
    pub sigma2: f64,
    /// `int_0^inf z`; integrated on the grid when absent.
    pub z_integral: Option<f64>,
    /// `int_0^inf u z(u) du`; integrated on the grid when absent
    /// (`f64::INFINITY` marks a divergent moment).
    pub z_first_moment: Option<f64>,
}

impl GeneralRenewalProblem {
    pub fn new(
        z: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        mu: f64,
        sigma2: f64,
    ) -> Self {
        Self { z: Arc::new(z), cdf: Arc::new(cdf), mu, sigma2, z_integral: None, z_first_moment: None }
    }

    pub fn with_integral(mut self, a: f64) -> Self {
        self.z_integral = Some(a);
        self
    }

    pub fn with_first_moment(mut self, m: f64) -> Self {
        self.z_first_moment = Some(m);
        self
    }
}

#[derive(Debug, Clone)]
pub struct GeneralSolution {
    pub grid: Grid,
    pub z: Vec<f64>,
    /// `G(x) = int_0^x (Z(t) - a / mu) dt`.
    pub g: Vec<f64>,
    /// `-(1/mu) int u z(u) du + a (sigma^2 + mu^2) / (2 mu^2)`; `-inf` if the moment diverges.
    pub g_limit: f64,
    pub a: f64,
    pub first_moment: f64,
    /// `G(t_max) - g_limit`.
    pub defect: f64,
}

pub fn solve_general(problem: &GeneralRenewalProblem, grid: Grid) -> Result<GeneralSolution> {
    let GeneralRenewalProblem { mu, sigma2, .. } = *problem;
    if !(mu > 0.0 && sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("need mu > 0 and sigma2 >= 0, got {mu}, {sigma2}")));
    }
    let h = grid.step();
    let z: Vec<f64> = grid.times().map(|t| (problem.z)(t)).collect();
    if let Some(i) = z.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("z must be finite and nonnegative; fails at t = {}", grid.t(i))));
    }
    let f: Vec<f64> = grid.times().map(|t| (problem.cdf)(t)).collect();
    check_monotone(&f, "F")?;
    if f.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidArgument("F leaves [0, 1]".into()));
    }
    let mut mass = Vec::with_capacity(f.len());
    mass.push(f[0]);
    mass.extend(f.windows(2).map(|w| w[1] - w[0]));

    let solved = renewal_convolve(&z, &mass)?;
    let a = problem.z_integral.unwrap_or_else(|| *cumulative_trapezoid(&z, h).last().unwrap());
    let first_moment = match problem.z_first_moment {
        Some(m) => m,
        None => {
            let uz: Vec<f64> = z.iter().enumerate().map(|(i, v)| grid.t(i) * v).collect();
            let running = cumulative_trapezoid(&uz, h);
            let total = *running.last().unwrap();
            let tail = total - running[running.len() * 9 / 10];
            // still accumulating over the last tenth of the grid: treat as divergent
            if total > 0.0 && tail > 1e-3 * total {
                f64::INFINITY
            } else {
                total
            }
        }
    };
    let level = a / mu;
    let g = cumulative_trapezoid(&solved.iter().map(|v| v - level).collect::<Vec<_>>(), h);
    let g_limit = if first_moment.is_infinite() {
        f64::NEG_INFINITY
    } else {
        -first_moment / mu + a * (sigma2 + mu * mu) / (2.0 * mu * mu)
    };
    let defect = g.last().unwrap() - g_limit;
    Ok(GeneralSolution { grid, z: solved, g, g_limit, a, first_moment, defect })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0.0, 1.0).is_err());
        assert!(Grid::new(0.3, 1.0).is_err());
        let g = Grid::new(0.25, 1.0).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.t(4), 1.0);
        assert!(g.interpolate(&[0.0, 1.0, 2.0, 3.0, 4.0], 1.5).is_err());
        assert!((g.interpolate(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.375).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lattice_source_rejected() {
        let trie = SplitVectorSource::deterministic_permuted(vec![0.5, 0.5]).unwrap();
        assert!(matches!(solve_split_renewal(&trie, Grid::new(0.01, 1.0).unwrap()), Err(Error::LatticeSuspect)));
    }

    #[test]
    fn non_monotone_nu_rejected() {
        let grid = Grid::new(0.5, 1.0).unwrap();
        assert!(solve_split_renewal_nu(&[0.0, 1.0, 0.5], 0.5, grid).is_err());
    }

    #[test]
    fn u_starts_at_zero() {
        let bst = SplitVectorSource::dirichlet(1.0, 2).unwrap();
        let sol = solve_split_renewal(&bst, Grid::new(0.01, 2.0).unwrap()).unwrap();
        assert_eq!(sol.u[0], 0.0);
        assert!(sol.u.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn heavy_count_at_k_equal_n_is_one() {
        let bst = SplitVectorSource::dirichlet(1.0, 2).unwrap();
        let sol = solve_split_renewal(&bst, Grid::new(0.01, 5.0).unwrap()).unwrap();
        assert_eq!(expected_heavy_count(&sol, 1e4, 1e4).unwrap(), 1.0);
        assert!(expected_heavy_count(&sol, 10.0, 11.0).is_err());
        assert!(matches!(expected_heavy_count(&sol, 1e6, 1.0), Err(Error::OutOfGrid { .. })));
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let p = GeneralRenewalProblem::new(|_| 0.0, |t| 1.0 - (-t).exp(), 1.0, 1.0);
        let s = solve_general(&p, Grid::new(0.01, 5.0).unwrap()).unwrap();
        assert!(s.z.iter().all(|&v| v == 0.0));
        assert!(s.g.iter().all(|&v| v == 0.0));
        assert_eq!(s.g_limit, 0.0);
    }

    #[test]
    fn divergent_first_moment_gives_minus_infinity() {
        let p = GeneralRenewalProblem::new(|t| 1.0 / (1.0 + t).powi(2), |t| 1.0 - (-t).exp(), 1.0, 1.0);
        let s = solve_general(&p, Grid::new(0.01, 20.0).unwrap()).unwrap();
        assert_eq!(s.g_limit, f64::NEG_INFINITY);
        let q = p.with_first_moment(f64::INFINITY);
        assert_eq!(solve_general(&q, Grid::new(0.01, 2.0).unwrap()).unwrap().g_limit, f64::NEG_INFINITY);
    }
}
