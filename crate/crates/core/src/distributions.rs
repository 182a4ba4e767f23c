//! The law of the split vector, its marginal `V`, the size-biased
//! component `Delta`, and the constants `mu = b E(-V ln V)`,
//! `sigma2 = b E(V ln^2 V) - mu^2` and `c = b E(V^2)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::numeric::{digamma, integrate, integrate_unit, trigamma};
use crate::{Error, Result};

/// Tolerance on `sum(V_i) == 1` for sampled vectors.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Default Monte Carlo budget for constants and empirical CDFs.
pub const DEFAULT_MC_BUDGET: usize = 1_000_000;

const QUAD_TOL: f64 = 1e-10;
const ECDF_SEED: u64 = 0x005E_ED0F_ECDF;

pub type Sampler = dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync;
pub type NegLogCdf = dyn Fn(f64) -> f64 + Send + Sync;

/// A caller-supplied split-vector law.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    pub branch_factor: usize,
    sampler: Arc<Sampler>,
    neg_log_cdf: Option<Arc<NegLogCdf>>,
    cdf_budget: usize,
    ecdf: Arc<OnceLock<Vec<f64>>>,
}

impl CustomLaw {
    /// `sampler` must fill its output slice (length `branch_factor`) with a
    /// probability vector.
    pub fn new<F>(name: impl Into<String>, branch_factor: usize, sampler: F) -> Self
    where
        F: Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            branch_factor,
            sampler: Arc::new(sampler),
            neg_log_cdf: None,
            cdf_budget: DEFAULT_MC_BUDGET,
            ecdf: Arc::new(OnceLock::new()),
        }
    }

    /// Closed-form CDF of `-ln V`.
    pub fn with_neg_log_cdf<F>(mut self, cdf: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.neg_log_cdf = Some(Arc::new(cdf));
        self
    }

    /// Sample budget of the empirical CDF used when no closed form is given.
    pub fn with_cdf_budget(mut self, budget: usize) -> Self {
        self.cdf_budget = budget.max(1);
        self.ecdf = Arc::new(OnceLock::new());
        self
    }

    pub fn cdf_budget(&self) -> usize {
        self.cdf_budget
    }

    pub fn has_closed_cdf(&self) -> bool {
        self.neg_log_cdf.is_some()
    }
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw")
            .field("name", &self.name)
            .field("branch_factor", &self.branch_factor)
            .field("closed_cdf", &self.neg_log_cdf.is_some())
            .field("cdf_budget", &self.cdf_budget)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum SplitLaw {
    /// Symmetric Dirichlet with the given concentration; `V ~ Beta(a, (b-1)a)`.
    DirichletSymmetric { concentration: f64, branch_factor: usize },
    /// Spacings of `b - 1` uniform points on `[0, 1]`.
    UniformSpacings { branch_factor: usize },
    /// A fixed probability vector, uniformly permuted per sample.
    DeterministicPermuted { probabilities: Vec<f64> },
    Custom(CustomLaw),
}

/// The law of the split vector attached to every vertex.
#[derive(Debug, Clone)]
pub struct SplitVectorSource {
    law: SplitLaw,
    lattice_suspect: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantsMethod {
    /// Closed form when available, quadrature when a CDF is known, else Monte Carlo.
    Auto,
    ClosedForm,
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticConstants {
    /// `E(-ln Delta)`, in nats.
    pub mu: f64,
    /// `Var(ln Delta)`.
    pub sigma2: f64,
    /// `E(Delta)`.
    pub c: f64,
    pub method: MethodTag,
    /// Standard error of `mu` for Monte Carlo estimates.
    pub standard_error: Option<f64>,
}

impl SplitVectorSource {
    pub fn dirichlet(concentration: f64, branch_factor: usize) -> Result<Self> {
        if !(concentration > 0.0 && concentration.is_finite()) {
            return Err(Error::InvalidSource(format!(
                "Dirichlet concentration must be positive, got {concentration}"
            )));
        }
        check_branch_factor(branch_factor)?;
        Ok(Self {
            law: SplitLaw::DirichletSymmetric { concentration, branch_factor },
            lattice_suspect: false,
        })
    }

    pub fn uniform_spacings(branch_factor: usize) -> Result<Self> {
        check_branch_factor(branch_factor)?;
        Ok(Self { law: SplitLaw::UniformSpacings { branch_factor }, lattice_suspect: false })
    }

    pub fn deterministic_permuted(probabilities: Vec<f64>) -> Result<Self> {
        check_branch_factor(probabilities.len())?;
        if probabilities.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidSource(
                "deterministic components must lie strictly inside (0, 1)".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidSource(format!("components sum to {total}, not 1")));
        }
        let lattice_suspect = on_common_grid(&probabilities);
        Ok(Self { law: SplitLaw::DeterministicPermuted { probabilities }, lattice_suspect })
    }

    /// Custom laws are never auto-flagged; pass `lattice_suspect` if known.
    pub fn custom(law: CustomLaw, lattice_suspect: bool) -> Result<Self> {
        check_branch_factor(law.branch_factor)?;
        Ok(Self { law: SplitLaw::Custom(law), lattice_suspect })
    }

    pub fn law(&self) -> &SplitLaw {
        &self.law
    }

    pub fn lattice_suspect(&self) -> bool {
        self.lattice_suspect
    }

    pub fn branch_factor(&self) -> usize {
        match &self.law {
            SplitLaw::DirichletSymmetric { branch_factor, .. }
            | SplitLaw::UniformSpacings { branch_factor } => *branch_factor,
            SplitLaw::DeterministicPermuted { probabilities } => probabilities.len(),
            SplitLaw::Custom(c) => c.branch_factor,
        }
    }

    /// `(alpha, beta)` of the Beta marginal, when the marginal is Beta.
    fn beta_marginal(&self) -> Option<(f64, f64)> {
        match &self.law {
            SplitLaw::DirichletSymmetric { concentration, branch_factor } => {
                Some((*concentration, (*branch_factor as f64 - 1.0) * concentration))
            }
            SplitLaw::UniformSpacings { branch_factor } => Some((1.0, *branch_factor as f64 - 1.0)),
            _ => None,
        }
    }

    /// Fill `out` (length `b`) with an independent copy of the split vector.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.branch_factor());
        match &self.law {
            SplitLaw::UniformSpacings { .. } => fill_normalized(out, || Exp1.sample(rng)),
            SplitLaw::DirichletSymmetric { concentration, .. } => {
                if *concentration == 1.0 {
                    fill_normalized(out, || Exp1.sample(rng));
                } else {
                    let gamma = Gamma::new(*concentration, 1.0)
                        .map_err(|e| Error::InvalidSource(e.to_string()))?;
                    fill_normalized(out, || gamma.sample(rng));
                }
            }
            SplitLaw::DeterministicPermuted { probabilities } => {
                out.copy_from_slice(probabilities);
                shuffle(out, rng);
            }
            SplitLaw::Custom(custom) => {
                let dyn_rng: &mut dyn RngCore = rng;
                (custom.sampler)(dyn_rng, out);
                validate_vector(out)?;
                shuffle(out, rng);
            }
        }
        Ok(())
    }

    pub fn sample_split_vector<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.branch_factor()];
        self.sample_into(rng, &mut out)?;
        Ok(out)
    }

    /// Draw `Delta`: sample a vector, then pick component `j` with probability `V_j`.
    pub fn sample_size_biased<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        let v = self.sample_split_vector(rng)?;
        Ok(v[pick_index(&v, rng.random::<f64>())])
    }

    /// `P(-ln V <= t)`.
    pub fn neg_log_v_cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.law {
            SplitLaw::DeterministicPermuted { probabilities } => {
                let b = probabilities.len() as f64;
                let hits = probabilities.iter().filter(|&&p| -p.ln() <= t * (1.0 + 1e-12)).count();
                hits as f64 / b
            }
            SplitLaw::Custom(custom) => match &custom.neg_log_cdf {
                Some(cdf) => cdf(t).clamp(0.0, 1.0),
                None => {
                    let sorted = custom.ecdf.get_or_init(|| self.empirical_neg_log(custom.cdf_budget));
                    let k = sorted.partition_point(|&x| x <= t);
                    k as f64 / sorted.len() as f64
                }
            },
            _ => {
                let (a, b) = self.beta_marginal().expect("beta marginal");
                // P(V >= e^-t) = P(1 - V <= 1 - e^-t), 1 - V ~ Beta(b, a)
                statrs::function::beta::beta_reg(b, a, -(-t).exp_m1())
            }
        }
    }

    /// Sorted samples of `-ln V` pooled over all components.
    fn empirical_neg_log(&self, budget: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(ECDF_SEED);
        let b = self.branch_factor();
        let mut buf = vec![0.0; b];
        let mut out = Vec::with_capacity(budget);
        while out.len() < budget {
            if self.sample_into(&mut rng, &mut buf).is_err() {
                continue;
            }
            for &v in buf.iter().take(budget - out.len()) {
                out.push(if v > 0.0 { -v.ln() } else { f64::INFINITY });
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn constants(&self, method: ConstantsMethod) -> Result<AnalyticConstants> {
        let closed = matches!(
            self.law,
            SplitLaw::DirichletSymmetric { .. }
                | SplitLaw::UniformSpacings { .. }
                | SplitLaw::DeterministicPermuted { .. }
        );
        match method {
            ConstantsMethod::Auto if closed => self.closed_form(),
            ConstantsMethod::Auto => match &self.law {
                SplitLaw::Custom(c) if c.has_closed_cdf() => self.quadrature(),
                _ => self.monte_carlo(DEFAULT_MC_BUDGET, ECDF_SEED),
            },
            ConstantsMethod::ClosedForm => self.closed_form(),
            ConstantsMethod::Quadrature => self.quadrature(),
            ConstantsMethod::MonteCarlo { samples, seed } => self.monte_carlo(samples, seed),
        }
    }

    fn closed_form(&self) -> Result<AnalyticConstants> {
        let (mu, sigma2, c) = match &self.law {
            SplitLaw::DeterministicPermuted { probabilities } => {
                let mu: f64 = probabilities.iter().map(|&p| -p * p.ln()).sum();
                let m2: f64 = probabilities.iter().map(|&p| p * p.ln().powi(2)).sum();
                let c: f64 = probabilities.iter().map(|&p| p * p).sum();
                (mu, (m2 - mu * mu).max(0.0), c)
            }
            SplitLaw::Custom(_) => {
                return Err(Error::InvalidArgument("no closed form for a custom law".into()))
            }
            _ => {
                let (a, rest) = self.beta_marginal().expect("beta marginal");
                // b*E(V g(V)) is E g(W) with W ~ Beta(a + 1, rest)
                let total = a + rest;
                let mu = digamma(total + 1.0) - digamma(a + 1.0);
                let sigma2 = trigamma(a + 1.0) - trigamma(total + 1.0);
                let c = (a + 1.0) / (total + 1.0);
                (mu, sigma2, c)
            }
        };
        Ok(AnalyticConstants { mu, sigma2, c, method: MethodTag::ClosedForm, standard_error: None })
    }

    fn quadrature(&self) -> Result<AnalyticConstants> {
        let b = self.branch_factor() as f64;
        let (mu, m2, c) = if let Some((a, rest)) = self.beta_marginal() {
            let ln_norm = statrs::function::beta::ln_beta(a, rest);
            let density = move |x: f64| ((a - 1.0) * x.ln() + (rest - 1.0) * (-x).ln_1p() - ln_norm).exp();
            let mu = b * integrate_unit(|x| -x * x.ln() * density(x), QUAD_TOL)?;
            let m2 = b * integrate_unit(|x| x * x.ln().powi(2) * density(x), QUAD_TOL)?;
            let c = b * integrate_unit(|x| x * x * density(x), QUAD_TOL)?;
            (mu, m2, c)
        } else {
            // E g(Y) = g(0) + int g'(y) P(Y > y) dy for Y = -ln V
            let upper = 60.0;
            let surv = |y: f64| 1.0 - self.neg_log_v_cdf(y);
            let mu = b * integrate(|y| (1.0 - y) * (-y).exp() * surv(y), 0.0, upper, QUAD_TOL)?;
            let m2 = b * integrate(|y| (2.0 * y - y * y) * (-y).exp() * surv(y), 0.0, upper, QUAD_TOL)?;
            let c = b * (1.0 - integrate(|y| 2.0 * (-2.0 * y).exp() * surv(y), 0.0, upper, QUAD_TOL)?);
            (mu, m2, c)
        };
        Ok(AnalyticConstants {
            mu,
            sigma2: (m2 - mu * mu).max(0.0),
            c,
            method: MethodTag::Quadrature,
            standard_error: None,
        })
    }

    fn monte_carlo(&self, samples: usize, seed: u64) -> Result<AnalyticConstants> {
        if samples < 2 {
            return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = vec![0.0; self.branch_factor()];
        let (mut s_mu, mut s_mu2, mut s_m2, mut s_c) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..samples {
            self.sample_into(&mut rng, &mut buf)?;
            // sum over components of V_i g(V_i) is an unbiased draw of b E(V g(V))
            let (mut x_mu, mut x_m2, mut x_c) = (0.0, 0.0, 0.0);
            for &v in &buf {
                if v > 0.0 {
                    let l = v.ln();
                    x_mu -= v * l;
                    x_m2 += v * l * l;
                    x_c += v * v;
                }
            }
            s_mu += x_mu;
            s_mu2 += x_mu * x_mu;
            s_m2 += x_m2;
            s_c += x_c;
        }
        let n = samples as f64;
        let mu = s_mu / n;
        let var_mu = (s_mu2 / n - mu * mu).max(0.0) * n / (n - 1.0);
        let sigma2 = (s_m2 / n - mu * mu).max(0.0);
        let c = s_c / n;
        if !(mu.is_finite() && sigma2.is_finite() && c.is_finite()) {
            return Err(Error::Numerical("non-finite Monte Carlo moment".into()));
        }
        Ok(AnalyticConstants {
            mu,
            sigma2,
            c,
            method: MethodTag::MonteCarlo,
            standard_error: Some((var_mu / n).sqrt()),
        })
    }
}

fn check_branch_factor(b: usize) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidSource(format!("branch factor must be >= 2, got {b}")));
    }
    Ok(())
}

fn fill_normalized<F: FnMut() -> f64>(out: &mut [f64], mut draw: F) {
    loop {
        let mut total = 0.0;
        for x in out.iter_mut() {
            *x = draw();
            total += *x;
        }
        if total > 0.0 {
            out.iter_mut().for_each(|x| *x /= total);
            return;
        }
    }
}

fn shuffle<R: Rng>(v: &mut [f64], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

fn validate_vector(v: &[f64]) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidSample(format!("component {bad} is not a nonnegative real")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidSample(format!("components sum to {total}")));
    }
    Ok(())
}

/// Index `i` with `u < V_1 + ... + V_i`; zero components are never returned.
pub(crate) fn pick_index(v: &[f64], u: f64) -> usize {
    pick_with(v.len(), |i| v[i], u)
}

/// `pick_index` over components read through `p`.
pub(crate) fn pick_with(len: usize, p: impl Fn(usize) -> f64, u: f64) -> usize {
    let mut acc = 0.0;
    for i in 0..len {
        let pi = p(i);
        acc += pi;
        if u < acc && pi > 0.0 {
            return i;
        }
    }
    (0..len).rev().find(|&i| p(i) > 0.0).unwrap_or(len - 1)
}

/// True when all `-ln p_i` are integer multiples of a common span
/// (ratios checked against rationals with denominators up to 1000).
fn on_common_grid(p: &[f64]) -> bool {
    let logs: Vec<f64> = p.iter().map(|x| -x.ln()).collect();
    let base = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    logs.iter().all(|&x| {
        let r = x / base;
        (1..=1000).any(|q| {
            let scaled = r * q as f64;
            (scaled - scaled.round()).abs() < 1e-9 * q as f64
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bst_constants_closed_form() {
        let s = SplitVectorSource::dirichlet(1.0, 2).unwrap();
        let k = s.constants(ConstantsMethod::ClosedForm).unwrap();
        assert!((k.mu - 0.5).abs() < 1e-12);
        assert!((k.sigma2 - 0.25).abs() < 1e-12);
        assert!((k.c - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_deterministic_constants() {
        for b in 2..6 {
            let s = SplitVectorSource::deterministic_permuted(vec![1.0 / b as f64; b]).unwrap();
            assert!(s.lattice_suspect());
            let k = s.constants(ConstantsMethod::Auto).unwrap();
            assert!((k.mu - (b as f64).ln()).abs() < 1e-12);
            assert!(k.sigma2.abs() < 1e-12);
            assert!((k.c - 1.0 / b as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_flagging() {
        let grid = SplitVectorSource::deterministic_permuted(vec![0.5, 0.25, 0.25]).unwrap();
        assert!(grid.lattice_suspect());
        let off = SplitVectorSource::deterministic_permuted(vec![0.3, 0.7]).unwrap();
        assert!(!off.lattice_suspect());
    }

    #[test]
    fn invalid_sources_rejected() {
        assert!(SplitVectorSource::dirichlet(0.0, 2).is_err());
        assert!(SplitVectorSource::dirichlet(1.0, 1).is_err());
        assert!(SplitVectorSource::deterministic_permuted(vec![0.5, 0.6]).is_err());
        assert!(SplitVectorSource::deterministic_permuted(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn deterministic_permutation_both_orders() {
        let s = SplitVectorSource::deterministic_permuted(vec![0.3, 0.7]).unwrap();
        let mut r = rng(3);
        let trials = 20_000;
        let mut first_small = 0;
        for _ in 0..trials {
            let v = s.sample_split_vector(&mut r).unwrap();
            assert!(v == [0.3, 0.7] || v == [0.7, 0.3]);
            if v[0] == 0.3 {
                first_small += 1;
            }
        }
        // binomial(20000, 1/2): sd ~ 70.7
        assert!((first_small as f64 - 10_000.0).abs() < 4.0 * 70.8);
    }

    #[test]
    fn custom_sampler_rejection() {
        let bad = CustomLaw::new("bad", 2, |_, out| {
            out[0] = 0.7;
            out[1] = 0.7;
        });
        let s = SplitVectorSource::custom(bad, false).unwrap();
        let err = s.sample_split_vector(&mut rng(1)).unwrap_err();
        assert!(matches!(err, Error::InvalidSample(_)), "{err}");
    }

    #[test]
    fn neg_log_cdf_examples() {
        let bst = SplitVectorSource::dirichlet(1.0, 2).unwrap();
        assert!((bst.neg_log_v_cdf(2f64.ln()) - 0.5).abs() < 1e-14);
        assert_eq!(bst.neg_log_v_cdf(0.0), 0.0);
        let sym = SplitVectorSource::deterministic_permuted(vec![0.5, 0.5]).unwrap();
        assert_eq!(sym.neg_log_v_cdf(2f64.ln()), 1.0);
        assert_eq!(sym.neg_log_v_cdf(0.0), 0.0);
        let spacings = SplitVectorSource::uniform_spacings(3).unwrap();
        // V ~ Beta(1, 2): P(V >= x) = (1 - x)^2
        let t = 0.7_f64;
        assert!((spacings.neg_log_v_cdf(t) - (1.0 - (-t).exp()).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn neg_log_cdf_is_monotone() {
        let s = SplitVectorSource::dirichlet(2.5, 3).unwrap();
        let mut prev = 0.0;
        for i in 0..400 {
            let f = s.neg_log_v_cdf(i as f64 * 0.05);
            assert!(f >= prev - 1e-15);
            prev = f;
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for (a, b) in [(1.0, 2), (1.0, 3), (0.5, 2), (3.0, 4)] {
            let s = SplitVectorSource::dirichlet(a, b).unwrap();
            let cf = s.constants(ConstantsMethod::ClosedForm).unwrap();
            let q = s.constants(ConstantsMethod::Quadrature).unwrap();
            assert!((cf.mu - q.mu).abs() < 1e-7, "a={a} b={b}: {cf:?} {q:?}");
            assert!((cf.sigma2 - q.sigma2).abs() < 1e-7, "a={a} b={b}: {cf:?} {q:?}");
            assert!((cf.c - q.c).abs() < 1e-7, "a={a} b={b}: {cf:?} {q:?}");
        }
    }

    #[test]
    fn custom_with_cdf_uses_quadrature() {
        // (U, 1 - U) supplied by hand; -ln V ~ Exp(1)
        let law = CustomLaw::new("uniform-pair", 2, |rng, out| {
            let u: f64 = rng.random();
            out[0] = u;
            out[1] = 1.0 - u;
        })
        .with_neg_log_cdf(|t| 1.0 - (-t).exp());
        let s = SplitVectorSource::custom(law, false).unwrap();
        let k = s.constants(ConstantsMethod::Auto).unwrap();
        assert_eq!(k.method, MethodTag::Quadrature);
        assert!((k.mu - 0.5).abs() < 1e-8);
        assert!((k.sigma2 - 0.25).abs() < 1e-8, "{k:?}");
        assert!((k.c - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn pick_index_skips_zero_mass() {
        assert_eq!(pick_index(&[0.0, 1.0], 0.0), 1);
        assert_eq!(pick_index(&[0.5, 0.0, 0.5], 0.5), 2);
        assert_eq!(pick_index(&[0.5, 0.5], 0.9999999999999999), 1);
    }
}
