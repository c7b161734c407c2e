//! Estimation strategies under i.i.d. sampling, tail-probability simulation
//! and large-deviation exponent extraction.
//!
//! Every strategy samples from the exact classical law its measurements
//! induce. Mean-type strategies can additionally be simulated with an
//! exponentially tilted proposal, which keeps deep tails observable; the
//! importance weights make that estimator unbiased.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::expfam::{kl_discrete, log_sum_exp, projection_estimator, CurveModel};
use crate::families::{Domain, StateFamily};
use crate::linalg::{eig_hermitian, trace_product_re, DensityMatrix, HermitianOperator};
use crate::measurement::{distribution, faithful_povm, spectral_pvm, Povm};
use crate::qmetrics::{family_relative_entropy, kmb_fisher, relative_entropy, sld_and_fisher};
use crate::repdecomp::{madaptive_block_povm, qubit_irrep_pvm, refine_with_state, BlockPovm};
use crate::stats::{categorical, golden_section_max, multinomial, stream_rng, weighted_line_fit, wilson_interval};

/// Estimator construction recipes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategySpec {
    /// Measure `E(L_{θ0}/J_{θ0})` on every copy; estimate = mean + θ0.
    FixedSld { theta0: f64 },
    /// Faithful POVM and MLE on `⌈δn⌉` copies, then `E(L_θ̌)` on the rest.
    TwoStage { delta: f64 },
    /// Faithful POVM on `⌈√n⌉` copies, then the refined PVM `E_{θ1}` on the
    /// rest with a likelihood-ratio test in favour of `θ1`.
    Superefficient { theta1: f64 },
    /// Blocks of `m` copies measured with the block POVM at `θ0`, projection
    /// estimator on the block outcome statistics.
    MAdaptive { theta0: f64, m: usize, delta: f64 },
    /// Mean of homodyne outcomes.
    GaussianHomodyne { nbar: f64 },
    /// `√(K/n)` for the total photon count `K`.
    GaussianNumber { nbar: f64 },
}

impl StrategySpec {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::FixedSld { .. } => "fixed-sld",
            StrategySpec::TwoStage { .. } => "two-stage",
            StrategySpec::Superefficient { .. } => "superefficient",
            StrategySpec::MAdaptive { .. } => "m-adaptive",
            StrategySpec::GaussianHomodyne { .. } => "gaussian-homodyne",
            StrategySpec::GaussianNumber { .. } => "gaussian-number",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        match *self {
            StrategySpec::FixedSld { theta0 } if !theta0.is_finite() => bad("theta0 must be finite".into()),
            StrategySpec::TwoStage { delta } if !(delta > 0.0 && delta < 1.0) => {
                bad(format!("two-stage delta = {delta} must lie in (0, 1)"))
            }
            StrategySpec::Superefficient { theta1 } if !theta1.is_finite() => bad("theta1 must be finite".into()),
            StrategySpec::MAdaptive { m, delta, theta0 } => {
                if m == 0 || m > 6 {
                    return Err(Error::Capacity(format!("block size m = {m} must lie in 1..=6")));
                }
                if !(delta > 0.0 && delta < 1.0) || !theta0.is_finite() {
                    return bad(format!("m-adaptive needs finite theta0 and delta in (0, 1), got delta = {delta}"));
                }
                Ok(())
            }
            StrategySpec::GaussianHomodyne { nbar } | StrategySpec::GaussianNumber { nbar } if !(nbar > 0.0) => {
                bad(format!("nbar = {nbar} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// How tail probabilities are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    /// Plain sampling from the strategy's outcome law.
    Direct,
    /// Exponentially tilted proposal with importance weights.
    Tilted,
}

/// Monte-Carlo plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_grid: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub eps_list: Vec<f64>,
    /// Worker-count hint; never changes results.
    pub workers: Option<usize>,
    pub sampler: Sampler,
}

impl SimulationConfig {
    pub fn new(n_grid: Vec<usize>, eps_list: Vec<f64>, trials: u64, seed: u64) -> Self {
        Self {
            n_grid,
            trials,
            seed,
            eps_list,
            workers: None,
            sampler: Sampler::Direct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::Validation("n grid must be a non-empty list of positive integers".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("n grid must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Validation("trials must be positive".into()));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Validation("epsilon list must contain positive finite values".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Validation("worker hint must be positive".into()));
        }
        Ok(())
    }
}

/// How a tail estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Direct,
    Tilted,
    Exact,
}

impl EstimateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateMethod::Direct => "direct",
            EstimateMethod::Tilted => "tilted",
            EstimateMethod::Exact => "exact",
        }
    }
}

/// Estimate of `P{|T_n − θ| ≥ ε}`.
///
/// For direct sampling `hits` counts tail events and the interval is the 95%
/// Wilson interval. For tilted sampling `hits` counts proposal draws in the
/// tail, `p_hat` is the importance-weighted estimate and the interval is the
/// normal 95% interval of that estimate. Exact estimates have a degenerate
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub n: usize,
    pub eps: f64,
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub method: EstimateMethod,
    /// Relative standard error of `p_hat` (tilted sampling only).
    pub rel_stderr: f64,
    /// Trials whose estimate was clamped to the end of a search interval.
    pub clamp_events: u64,
    /// Trials where the maximum-likelihood step fell back to the grid argmax.
    pub fallback_events: u64,
}

impl TailEstimate {
    /// An exactly known tail probability.
    pub fn exact(n: usize, eps: f64, p: f64) -> Self {
        Self {
            n,
            eps,
            hits: 0,
            trials: 0,
            p_hat: p,
            wilson_lo: p,
            wilson_hi: p,
            method: EstimateMethod::Exact,
            rel_stderr: 0.0,
            clamp_events: 0,
            fallback_events: 0,
        }
    }

    /// A direct Monte-Carlo estimate from a hit count.
    pub fn from_hits(n: usize, eps: f64, hits: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials);
        Self {
            n,
            eps,
            hits,
            trials,
            p_hat: hits as f64 / trials as f64,
            wilson_lo: lo,
            wilson_hi: hi,
            method: EstimateMethod::Direct,
            rel_stderr: 0.0,
            clamp_events: 0,
            fallback_events: 0,
        }
    }

    /// Usable for exponent regression: `p̂ ∈ (0, 1)` and, for sampled
    /// estimates, at least ten tail hits.
    pub fn usable(&self) -> bool {
        let in_range = self.p_hat > 0.0 && self.p_hat < 1.0;
        match self.method {
            EstimateMethod::Exact => in_range,
            _ => in_range && self.hits >= 10,
        }
    }

    /// Approximate variance of `log p̂`.
    fn log_variance(&self) -> f64 {
        match self.method {
            EstimateMethod::Exact => 1.0,
            EstimateMethod::Direct => (1.0 - self.p_hat) / self.hits as f64,
            EstimateMethod::Tilted => self.rel_stderr * self.rel_stderr,
        }
    }
}

/// Outcome of one simulated trial.
#[derive(Debug, Clone, Copy, Default)]
struct Trial {
    estimate: f64,
    log_weight: f64,
    clamped: bool,
    fallback: bool,
}

/// Finite search interval for a parameter domain: open ends are pulled in by
/// 1e−9 and unbounded ends are cut at ±10.
pub fn search_interval(domain: &Domain) -> (f64, f64) {
    use crate::families::Bound;
    let lo = match domain.lower {
        Bound::Open(a) => a + 1e-9,
        Bound::Closed(a) => a,
        Bound::Unbounded => -10.0,
    };
    let hi = match domain.upper {
        Bound::Open(b) => b - 1e-9,
        Bound::Closed(b) => b,
        Bound::Unbounded => 10.0,
    };
    (lo, hi)
}

/// Outcome values and probabilities of a spectral measurement.
fn spectral_law(x: &HermitianOperator, rho: &DensityMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let pvm = spectral_pvm(x);
    let d = distribution(pvm.as_povm(), rho)?;
    Ok((d.values, d.probabilities))
}

/// `L_θ/J_θ` at θ.
fn normalized_sld<F: StateFamily + ?Sized>(family: &F, theta: f64) -> Result<HermitianOperator> {
    let rho = family.state(theta)?;
    let (l, j) = sld_and_fisher(&rho, &family.derivative(theta)?)?;
    if !(j > 0.0) {
        return Err(Error::Estimation(format!("Fisher information vanishes at theta = {theta}")));
    }
    Ok(l.scale(1.0 / j))
}

/// Mixture of exponentially tilted multinomial laws for the sum of `n`
/// i.i.d. finite-valued outcomes, aimed at the given targets for the mean.
struct TiltedMean {
    values: Vec<f64>,
    probs: Vec<f64>,
    // (tilt, log-partition), one per mixture component.
    tilts: Vec<(f64, f64)>,
}

impl TiltedMean {
    fn log_partition(values: &[f64], probs: &[f64], t: f64) -> f64 {
        let e: Vec<f64> = values
            .iter()
            .zip(probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(x, p)| p.ln() + t * x)
            .collect();
        log_sum_exp(&e)
    }

    fn tilted_mean(values: &[f64], probs: &[f64], t: f64) -> f64 {
        let l = Self::log_partition(values, probs, t);
        values
            .iter()
            .zip(probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(x, p)| x * (p.ln() + t * x - l).exp())
            .sum()
    }

    fn new(values: Vec<f64>, probs: Vec<f64>, targets: &[f64]) -> Self {
        let support: Vec<f64> = values.iter().zip(&probs).filter(|(_, p)| **p > 0.0).map(|(x, _)| *x).collect();
        let lo = support.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = Self::tilted_mean(&values, &probs, 0.0);
        let mut tilts = Vec::new();
        for &a in targets {
            let t = if !(hi > lo) || !a.is_finite() {
                0.0
            } else {
                let span = hi - lo;
                let a = a.clamp(lo + 1e-6 * span, hi - 1e-6 * span);
                if (a - mean).abs() <= 1e-12 * span {
                    0.0
                } else {
                    // Monotone root of the tilted mean.
                    let dir = if a > mean { 1.0 } else { -1.0 };
                    let mut far = dir;
                    while (Self::tilted_mean(&values, &probs, far) - a) * dir < 0.0 && far.abs() < 1e6 {
                        far *= 2.0;
                    }
                    let (mut x0, mut x1) = (0.0, far);
                    for _ in 0..200 {
                        let mid = 0.5 * (x0 + x1);
                        if (Self::tilted_mean(&values, &probs, mid) - a) * dir < 0.0 {
                            x0 = mid;
                        } else {
                            x1 = mid;
                        }
                    }
                    0.5 * (x0 + x1)
                }
            };
            tilts.push((t, Self::log_partition(&values, &probs, t)));
        }
        if tilts.is_empty() {
            tilts.push((0.0, 0.0));
        }
        Self { values, probs, tilts }
    }

    /// Draws counts from the mixture; returns the counts and the log
    /// importance weight `log P(counts) − log Q(counts)`.
    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<u64>, f64) {
        let k = rng.random_range(0..self.tilts.len());
        let (t, l) = self.tilts[k];
        let q: Vec<f64> = self
            .values
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| if *p > 0.0 { (p.ln() + t * x - l).exp() } else { 0.0 })
            .collect();
        let counts = multinomial(n as u64, &q, rng);
        let s: f64 = counts.iter().zip(&self.values).map(|(c, x)| *c as f64 * x).sum();
        let nf = n as f64;
        let comps: Vec<f64> = self
            .tilts
            .iter()
            .map(|(tk, lk)| tk * s - nf * lk - (self.tilts.len() as f64).ln())
            .collect();
        (counts, -log_sum_exp(&comps))
    }
}

fn sample_mean<R: Rng + ?Sized>(values: &[f64], probs: &[f64], n: usize, rng: &mut R) -> f64 {
    let counts = multinomial(n as u64, probs, rng);
    counts.iter().zip(values).map(|(c, x)| *c as f64 * x).sum::<f64>() / n as f64
}

/// Fixed-SLD estimator: `E(L_{θ0}/J_{θ0})` on each of `n` copies, estimate
/// = sample mean + θ0.
pub fn run_fixed_sld<F: StateFamily + ?Sized, R: Rng + ?Sized>(
    theta0: f64,
    family: &F,
    theta_true: f64,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Validation("n must be positive".into()));
    }
    let x = normalized_sld(family, theta0)?;
    let (values, probs) = spectral_law(&x, &family.state(theta_true)?)?;
    Ok(sample_mean(&values, &probs, n, rng) + theta0)
}

/// `φ_{θ,θ̌}(s) = Tr ρ_θ exp(s(X − Tr ρ_θ X))` with `X = L_θ̌/J_θ̌`.
pub fn mgf_phi<F: StateFamily + ?Sized>(family: &F, theta: f64, theta_check: f64, s: f64) -> Result<f64> {
    let x = normalized_sld(family, theta_check)?;
    let rho = family.state(theta)?;
    Ok(centered_log_mgf(&x, &rho, s)?.exp())
}

fn centered_log_mgf(x: &HermitianOperator, rho: &DensityMatrix, s: f64) -> Result<f64> {
    let spec = eig_hermitian(x);
    let r = spec.to_eigenbasis(rho.matrix());
    let mu = x.expectation(rho);
    let terms: Vec<f64> = spec
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(k, _)| r[(*k, *k)].re > 0.0)
        .map(|(k, v)| r[(k, k)].re.ln() + s * (v - mu))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// `c_{θ,θ̌} = Tr ρ_θ (X − Tr ρ_θ X)²` with `X = L_θ̌/J_θ̌`.
pub fn mgf_curvature<F: StateFamily + ?Sized>(family: &F, theta: f64, theta_check: f64) -> Result<f64> {
    let x = normalized_sld(family, theta_check)?;
    let rho = family.state(theta)?;
    let mu = x.expectation(&rho);
    let centered = x.shift(-mu);
    Ok(trace_product_re(&(centered.matrix() * centered.matrix()), rho.matrix()))
}

/// `sup_s (a s − log φ_{θ,θ̌}(s))`, the Cramér rate of the sample mean of
/// `X − Tr ρ_θ X` exceeding `a` (or falling below a negative `a`).
pub fn legendre_rate<F: StateFamily + ?Sized>(family: &F, theta: f64, theta_check: f64, a: f64) -> Result<f64> {
    let x = normalized_sld(family, theta_check)?;
    let rho = family.state(theta)?;
    let spec = eig_hermitian(&x);
    let mu = x.expectation(&rho);
    let (lo, hi) = (spec.min_eigenvalue() - mu, spec.max_eigenvalue() - mu);
    if a > hi + 1e-12 || a < lo - 1e-12 {
        return Ok(f64::INFINITY);
    }
    let f = |s: f64| a * s - centered_log_mgf(&x, &rho, s).unwrap_or(f64::INFINITY);
    let dir = if a >= 0.0 { 1.0 } else { -1.0 };
    let mut smax = 1.0;
    while smax < 1e6 && f(dir * 2.0 * smax) > f(dir * smax) {
        smax *= 2.0;
    }
    let (_, v) = golden_section_max(|s| f(dir * s), 0.0, 2.0 * smax, 1e-12 * smax.max(1.0));
    Ok(v.max(0.0))
}

/// Two-sided Cramér rate of the fixed-SLD estimator at `θ_true`.
pub fn fixed_sld_rate<F: StateFamily + ?Sized>(family: &F, theta0: f64, theta_true: f64, eps: f64) -> Result<f64> {
    let x = normalized_sld(family, theta0)?;
    let mu = x.expectation(&family.state(theta_true)?);
    // T − θ_true = mean(X) + θ0 − θ_true; shift into the centred variable.
    let up = theta_true + eps - theta0 - mu;
    let down = theta_true - eps - theta0 - mu;
    let ru = legendre_rate(family, theta_true, theta0, up)?;
    let rd = legendre_rate(family, theta_true, theta0, down)?;
    Ok(ru.min(rd))
}

/// Curve maximum likelihood for a fixed measurement: grid search over the
/// search interval with a golden-section polish around the grid winner.
struct CurveMle<'a, F: ?Sized> {
    family: &'a F,
    povm: Povm,
    grid: Vec<f64>,
    log_table: Vec<Vec<f64>>,
    interval: (f64, f64),
}

impl<'a, F: StateFamily + ?Sized> CurveMle<'a, F> {
    fn new(family: &'a F, povm: Povm, points: usize) -> Result<Self> {
        let interval = search_interval(&family.domain());
        let grid: Vec<f64> = (0..points)
            .map(|k| interval.0 + (interval.1 - interval.0) * k as f64 / (points - 1) as f64)
            .collect();
        let log_table = grid
            .iter()
            .map(|&t| {
                Ok(distribution(&povm, &family.state(t)?)?
                    .probabilities
                    .iter()
                    .map(|p| p.ln())
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self {
            family,
            povm,
            grid,
            log_table,
            interval,
        })
    }

    fn loglik(logp: &[f64], counts: &[u64]) -> f64 {
        let mut s = 0.0;
        for (c, lp) in counts.iter().zip(logp) {
            if *c > 0 {
                s += *c as f64 * lp;
            }
        }
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }

    /// Returns `(θ̌, fell_back_to_grid)`.
    fn estimate(&self, counts: &[u64]) -> (f64, bool) {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, row) in self.log_table.iter().enumerate() {
            let v = Self::loglik(row, counts);
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        if best_v == f64::NEG_INFINITY {
            return (self.grid[0], true);
        }
        let h = self.grid[1] - self.grid[0];
        let a = (self.grid[best] - h).max(self.interval.0);
        let b = (self.grid[best] + h).min(self.interval.1);
        let total: u64 = counts.iter().sum();
        let freq: Vec<f64> = counts.iter().map(|c| *c as f64 / total as f64).collect();
        // Maximizing the likelihood is minimizing D(freq ‖ P_θ).
        let obj = |t: f64| -> f64 {
            match self.family.state(t).and_then(|r| distribution(&self.povm, &r)) {
                Ok(d) => -kl_discrete(&freq, &d.probabilities),
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let (t, v) = golden_section_max(obj, a, b, 1e-10);
        if v.is_finite() {
            (t, false)
        } else {
            (self.grid[best], true)
        }
    }
}

/// Solves `Tr ρ_T L = target` on the monotone branch of `T ↦ Tr ρ_T L`
/// through `start`. Returns `(T, clamped)`; a clamp happens when the target
/// lies beyond the branch or the search interval.
fn invert_expectation<F: StateFamily + ?Sized>(
    family: &F,
    l: &HermitianOperator,
    start: f64,
    target: f64,
    interval: (f64, f64),
) -> Result<(f64, bool)> {
    let g = |t: f64| -> Result<f64> { Ok(l.expectation(&family.state(t)?) - target) };
    let g0 = g(start)?;
    if g0 == 0.0 {
        return Ok((start, false));
    }
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let step = 0.02;
    let (mut prev, mut gprev) = (start, g0);
    loop {
        let next = (prev + dir * step).clamp(interval.0, interval.1);
        if next == prev {
            return Ok((prev, true));
        }
        let gn = g(next)?;
        if gn * gprev <= 0.0 {
            let (mut a, mut b) = (prev, next);
            let mut ga = gprev;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let gm = g(mid)?;
                if gm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if (gm < 0.0) == (ga < 0.0) {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
                if (b - a).abs() < 1e-15 {
                    break;
                }
            }
            let root = 0.5 * (a + b);
            let res = g(root)?.abs();
            if res > 1e-9 {
                return Err(Error::Convergence(format!("stage-two root residual {res:e} exceeds 1e-9")));
            }
            return Ok((root, false));
        }
        // The expectation stopped increasing along the search direction: end of branch.
        if (gn - gprev) * dir <= 0.0 {
            return Ok((prev, true));
        }
        prev = next;
        gprev = gn;
    }
}

/// Two-stage estimator outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageOutcome {
    pub estimate: f64,
    pub stage_one: f64,
    pub clamped: bool,
    pub fallback: bool,
}

/// Two-stage estimator with its stage-one likelihood table precomputed, for
/// repeated sampling at a fixed true parameter.
pub struct TwoStageEstimator<'a, F: ?Sized> {
    family: &'a F,
    delta: f64,
    mle: CurveMle<'a, F>,
    faithful_probs: Vec<f64>,
    rho_true: DensityMatrix,
}

impl<'a, F: StateFamily + ?Sized> TwoStageEstimator<'a, F> {
    pub fn new(family: &'a F, delta: f64, theta_true: f64) -> Result<Self> {
        StrategySpec::TwoStage { delta }.validate()?;
        family.domain().require(theta_true)?;
        let povm = faithful_povm(family.dim())?;
        let rho_true = family.state(theta_true)?;
        let faithful_probs = distribution(&povm, &rho_true)?.probabilities;
        Ok(Self {
            family,
            delta,
            mle: CurveMle::new(family, povm, 2001)?,
            faithful_probs,
            rho_true,
        })
    }

    /// Copies used by stage one and stage two.
    pub fn split(&self, n: usize) -> (usize, usize) {
        let n1 = ((self.delta * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let n1 = n1.min(n);
        (n1, n - n1)
    }

    /// One draw of the estimator from `n` copies.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<TwoStageOutcome> {
        if n == 0 {
            return Err(Error::Validation("n must be positive".into()));
        }
        Ok(self.run(n, None, rng)?.0)
    }

    /// One trial. With `tail_targets` the stage-two counts come from a tilted
    /// proposal aimed at those estimate values.
    fn run<R: Rng + ?Sized>(&self, n: usize, tail_targets: Option<[f64; 2]>, rng: &mut R) -> Result<(TwoStageOutcome, f64)> {
        let (n1, n2) = self.split(n);
        let counts = multinomial(n1 as u64, &self.faithful_probs, rng);
        let (check, fallback) = self.mle.estimate(&counts);
        if n2 == 0 {
            return Ok((
                TwoStageOutcome {
                    estimate: check,
                    stage_one: check,
                    clamped: false,
                    fallback,
                },
                0.0,
            ));
        }
        let rho_check = self.family.state(check)?;
        let (l, _) = sld_and_fisher(&rho_check, &self.family.derivative(check)?)?;
        let (values, probs) = spectral_law(&l, &self.rho_true)?;
        let (mean, log_w) = match tail_targets {
            None => (sample_mean(&values, &probs, n2, rng), 0.0),
            Some(ts) => {
                let mut targets = Vec::with_capacity(2);
                for t in ts {
                    let t = t.clamp(self.mle.interval.0, self.mle.interval.1);
                    targets.push(l.expectation(&self.family.state(t)?));
                }
                let tm = TiltedMean::new(values.clone(), probs.clone(), &targets);
                let (c, lw) = tm.sample(n2, rng);
                (c.iter().zip(&values).map(|(c, x)| *c as f64 * x).sum::<f64>() / n2 as f64, lw)
            }
        };
        let (estimate, clamped) = invert_expectation(self.family, &l, check, mean, self.mle.interval)?;
        Ok((
            TwoStageOutcome {
                estimate,
                stage_one: check,
                clamped,
                fallback,
            },
            log_w,
        ))
    }
}

/// Two-stage estimator: faithful POVM and curve MLE on `⌈δn⌉` copies, then
/// `E(L_θ̌)` on the remaining copies and inversion of `T ↦ Tr ρ_T L_θ̌`.
pub fn run_two_stage<F: StateFamily + ?Sized, R: Rng + ?Sized>(
    delta: f64,
    family: &F,
    theta_true: f64,
    n: usize,
    rng: &mut R,
) -> Result<TwoStageOutcome> {
    TwoStageEstimator::new(family, delta, theta_true)?.sample(n, rng)
}

/// Exact mode returns the law of `T_n`; sample mode draws one value from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperefficientMode {
    Exact,
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SuperefficientOutput {
    /// `(value, probability)` pairs sorted by value.
    Distribution(Vec<(f64, f64)>),
    Sample(f64),
}

/// Largest `n` for the superefficient strategy.
pub const SUPEREFFICIENT_MAX_N: usize = 12;

fn compositions(total: usize, parts: usize) -> Vec<Vec<u64>> {
    fn rec(rest: usize, parts: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            cur.push(rest as u64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=rest).rev() {
            cur.push(k as u64);
            rec(rest - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

fn multinomial_log_pmf(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut s = ln_factorial(n);
    for (c, p) in counts.iter().zip(probs) {
        s -= ln_factorial(*c);
        if *c > 0 {
            s += *c as f64 * p.ln();
        }
    }
    s
}

/// `δ_n = n^{−1/5}`.
pub fn delta_n(n: usize) -> f64 {
    (n as f64).powf(-0.2)
}

/// Copy split `(⌈√n⌉, n − ⌈√n⌉)` of the superefficient strategy.
pub fn superefficient_split(n: usize) -> (usize, usize) {
    let n1 = ((n as f64).sqrt() - 1e-12).ceil() as usize;
    (n1, n - n1)
}

/// Probability that the stage-two test decides `θ1`, for a given stage-one
/// estimate. The test accepts `θ1` on outcome ω when
/// `e^{n(1−δ_{n2}) D(ρ_θ̌‖ρ_θ1)} P_θ1(ω) ≥ P_θ̌(ω)`.
pub fn superefficient_accept_probability<F: StateFamily + ?Sized>(
    family: &F,
    theta1: f64,
    theta_check: f64,
    theta_true: f64,
    n: usize,
) -> Result<f64> {
    let (_, n2) = superefficient_split(n);
    if n2 == 0 {
        return Ok(if theta_check == theta1 { 1.0 } else { 0.0 });
    }
    let e = qubit_irrep_pvm(n2)?;
    let refined = refine_with_state(&e, family, theta1)?;
    let r1 = family.state(theta1)?;
    let rc = family.state(theta_check)?;
    let rt = family.state(theta_true)?;
    let d = relative_entropy(&rc, &r1)?;
    let c = n as f64 * (1.0 - delta_n(n2));
    let p1 = refined.sector_probabilities(&r1)?;
    let pc = refined.sector_probabilities(&rc)?;
    let pt = refined.sector_probabilities(&rt)?;
    let mut accept = 0.0;
    for ((s1, sc), st) in p1.iter().zip(&pc).zip(&pt) {
        for k in 0..s1.probabilities.len() {
            let lhs = if d.is_infinite() {
                f64::INFINITY
            } else {
                c * d + s1.probabilities[k].ln()
            };
            let rhs = sc.probabilities[k].ln();
            if lhs >= rhs || (s1.probabilities[k] == sc.probabilities[k]) {
                accept += st.multiplicity as f64 * st.probabilities[k];
            }
        }
    }
    Ok(accept.min(1.0))
}

/// Exact law of the superefficient estimator: every stage-one count vector
/// is enumerated with its multinomial weight and curve MLE, and the
/// stage-two acceptance probability splits its mass between `θ1` and `θ̌`.
pub fn superefficient_distribution<F: StateFamily + ?Sized>(
    theta1: f64,
    family: &F,
    theta_true: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if family.dim() != 2 {
        return Err(Error::Configuration("the superefficient strategy needs a qubit family".into()));
    }
    if n < 2 || n > SUPEREFFICIENT_MAX_N {
        return Err(Error::Capacity(format!(
            "superefficient exact enumeration supports 2 <= n <= {SUPEREFFICIENT_MAX_N}, got {n}"
        )));
    }
    family.domain().require(theta1)?;
    let (n1, _) = superefficient_split(n);
    let povm = faithful_povm(2)?;
    let probs = distribution(&povm, &family.state(theta_true)?)?.probabilities;
    let mle = CurveMle::new(family, povm.clone(), 2001)?;
    let mut law: BTreeMap<u64, f64> = BTreeMap::new();
    let mut add = |v: f64, p: f64| {
        if p > 0.0 {
            *law.entry(v.to_bits()).or_insert(0.0) += p;
        }
    };
    for counts in compositions(n1, povm.len()) {
        let w = multinomial_log_pmf(&counts, &probs).exp();
        if w == 0.0 {
            continue;
        }
        let (check, _) = mle.estimate(&counts);
        let acc = superefficient_accept_probability(family, theta1, check, theta_true, n)?;
        add(theta1, w * acc);
        add(check, w * (1.0 - acc));
    }
    let mut out: Vec<(f64, f64)> = law.into_iter().map(|(b, p)| (f64::from_bits(b), p)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Superefficient estimator in exact or sampling mode.
pub fn run_superefficient<F: StateFamily + ?Sized, R: Rng + ?Sized>(
    theta1: f64,
    family: &F,
    theta_true: f64,
    n: usize,
    mode: SuperefficientMode,
    rng: &mut R,
) -> Result<SuperefficientOutput> {
    let law = superefficient_distribution(theta1, family, theta_true, n)?;
    match mode {
        SuperefficientMode::Exact => Ok(SuperefficientOutput::Distribution(law)),
        SuperefficientMode::Sample => {
            let p: Vec<f64> = law.iter().map(|x| x.1).collect();
            Ok(SuperefficientOutput::Sample(law[categorical(&p, rng)].0))
        }
    }
}

/// The block POVM seen as a curve for the projection estimator. Data points
/// are sparse empirical distributions over encoded block outcomes.
pub struct BlockCurve<'a, F: ?Sized> {
    family: &'a F,
    povm: &'a BlockPovm,
    bounds: (f64, f64),
}

impl<'a, F: StateFamily + ?Sized> BlockCurve<'a, F> {
    pub fn new(family: &'a F, povm: &'a BlockPovm) -> Self {
        Self {
            family,
            povm,
            bounds: search_interval(&family.domain()),
        }
    }
}

impl<F: StateFamily + ?Sized> CurveModel for BlockCurve<'_, F> {
    type Point = [(usize, f64)];

    fn grid_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn divergence_to_curve(&self, x: &[(usize, f64)], u: f64) -> f64 {
        let Ok(rho) = self.family.state(u) else {
            return f64::INFINITY;
        };
        let Ok((s, r)) = self.povm.component_probabilities(&rho) else {
            return f64::INFINITY;
        };
        let mut d = 0.0;
        for &(o, f) in x {
            if f <= 0.0 {
                continue;
            }
            let p = self.povm.outcome_probability(&s, &r, o);
            if p <= 0.0 {
                return f64::INFINITY;
            }
            d += f * (f / p).ln();
        }
        d.max(0.0)
    }

    fn divergence_on_curve(&self, u: f64, u0: f64) -> f64 {
        match (self.family.state(u), self.family.state(u0)) {
            (Ok(a), Ok(b)) => self.povm.kl(&a, &b).unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        }
    }
}

fn m_adaptive_with<F: StateFamily + ?Sized, R: Rng + ?Sized>(
    family: &F,
    povm: &BlockPovm,
    theta0: f64,
    single: &[f64],
    refined: &[f64],
    blocks: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..blocks {
        *counts.entry(povm.sample(single, refined, rng)).or_insert(0) += 1;
    }
    let x: Vec<(usize, f64)> = counts.into_iter().map(|(o, c)| (o, c as f64 / blocks as f64)).collect();
    projection_estimator(&BlockCurve::new(family, povm), &x, theta0)
}

/// m-adaptive estimator: `blocks` i.i.d. blocks of `m` copies measured with
/// the block POVM at `θ0`, followed by the projection estimator.
pub fn run_m_adaptive<F: StateFamily + ?Sized, R: Rng + ?Sized>(
    theta0: f64,
    m: usize,
    delta: f64,
    family: &F,
    theta_true: f64,
    blocks: usize,
    rng: &mut R,
) -> Result<f64> {
    StrategySpec::MAdaptive { theta0, m, delta }.validate()?;
    if blocks == 0 {
        return Err(Error::Validation("at least one block is required".into()));
    }
    let povm = madaptive_block_povm(family, theta0, m, delta)?;
    let (single, refined) = povm.component_probabilities(&family.state(theta_true)?)?;
    m_adaptive_with(family, &povm, theta0, &single, &refined, blocks, rng)
}

/// Exact tail `P{|X̄ − θ| ≥ ε}` of the homodyne mean.
pub fn homodyne_exact_tail(nbar: f64, n: usize, eps: f64) -> f64 {
    let sd = ((2.0 * nbar + 1.0) / (4.0 * n as f64)).sqrt();
    erfc(eps / sd / std::f64::consts::SQRT_2)
}

/// Exact tail of the number-measurement estimator at θ = 0:
/// `(N̄/(N̄+1))^{⌈nε²⌉}`.
pub fn number_exact_tail_at_zero(nbar: f64, n: usize, eps: f64) -> f64 {
    let k = (n as f64 * eps * eps - 1e-9).ceil().max(0.0);
    (nbar / (nbar + 1.0)).powf(k)
}

fn sample_number_estimate<R: Rng + ?Sized>(nbar: f64, theta: f64, n: usize, rng: &mut R) -> f64 {
    let s = (nbar / 2.0).sqrt();
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    let re = (n as f64).sqrt() * theta + s * g1;
    let im = s * g2;
    let lambda = re * re + im * im;
    let k = if lambda > 0.0 {
        Poisson::new(lambda).expect("positive rate").sample(rng)
    } else {
        0.0
    };
    (k / n as f64).sqrt()
}

/// Per-strategy state shared by all trials at one `(ε, n)`.
enum Plan<'a, F: ?Sized> {
    Fixed {
        theta0: f64,
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    TwoStage(Box<TwoStageEstimator<'a, F>>),
    Superefficient {
        laws: BTreeMap<usize, Vec<(f64, f64)>>,
    },
    MAdaptive {
        theta0: f64,
        povm: Box<BlockPovm>,
        single: Vec<f64>,
        refined: Vec<f64>,
    },
    Homodyne {
        var: f64,
    },
    Number {
        nbar: f64,
    },
}

fn check_gaussian<F: StateFamily + ?Sized>(family: &F, nbar: f64) -> Result<()> {
    match family.gaussian_nbar() {
        Some(v) if (v - nbar).abs() <= 1e-12 * nbar.max(1.0) => Ok(()),
        Some(v) => Err(Error::Configuration(format!(
            "strategy nbar = {nbar} does not match the family nbar = {v}"
        ))),
        None => Err(Error::Configuration(format!(
            "Gaussian strategies need a Gaussian family, got {}",
            family.name()
        ))),
    }
}

/// Simulates `P{|T_n − θ_true| ≥ ε}` for every `(ε, n)` of the plan.
///
/// Trial `t` at grid indices `(e, k)` draws from the stream keyed by
/// `(seed, e, k, t)`, so results do not depend on the worker count.
pub fn simulate_tail<F: StateFamily + ?Sized>(
    strategy: StrategySpec,
    family: &F,
    theta_true: f64,
    cfg: &SimulationConfig,
) -> Result<Vec<TailEstimate>> {
    strategy.validate()?;
    cfg.validate()?;
    family.domain().require(theta_true)?;
    let tilted = cfg.sampler == Sampler::Tilted;
    let plan: Plan<F> = match strategy {
        StrategySpec::FixedSld { theta0 } => {
            let x = normalized_sld(family, theta0)?;
            let (values, probs) = spectral_law(&x, &family.state(theta_true)?)?;
            Plan::Fixed { theta0, values, probs }
        }
        StrategySpec::TwoStage { delta } => Plan::TwoStage(Box::new(TwoStageEstimator::new(family, delta, theta_true)?)),
        StrategySpec::Superefficient { theta1 } => {
            if tilted {
                return Err(Error::Configuration("the tilted sampler is not available for superefficient".into()));
            }
            let mut laws = BTreeMap::new();
            for &n in &cfg.n_grid {
                laws.insert(n, superefficient_distribution(theta1, family, theta_true, n)?);
            }
            Plan::Superefficient { laws }
        }
        StrategySpec::MAdaptive { theta0, m, delta } => {
            if tilted {
                return Err(Error::Configuration("the tilted sampler is not available for m-adaptive".into()));
            }
            if family.dim() != 2 {
                return Err(Error::Configuration("the m-adaptive strategy needs a qubit family".into()));
            }
            if let Some(&n) = cfg.n_grid.iter().find(|&&n| n % m != 0) {
                return Err(Error::Configuration(format!("n = {n} is not a multiple of the block size m = {m}")));
            }
            let povm = madaptive_block_povm(family, theta0, m, delta)?;
            let (single, refined) = povm.component_probabilities(&family.state(theta_true)?)?;
            Plan::MAdaptive {
                theta0,
                povm: Box::new(povm),
                single,
                refined,
            }
        }
        StrategySpec::GaussianHomodyne { nbar } => {
            check_gaussian(family, nbar)?;
            Plan::Homodyne {
                var: (2.0 * nbar + 1.0) / 4.0,
            }
        }
        StrategySpec::GaussianNumber { nbar } => {
            check_gaussian(family, nbar)?;
            if tilted && theta_true != 0.0 {
                return Err(Error::Configuration(
                    "the tilted sampler is not available for gaussian-number away from theta = 0".into(),
                ));
            }
            Plan::Number { nbar }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Configuration(format!("cannot start worker pool: {e}")))?;
    let mut out = Vec::with_capacity(cfg.eps_list.len() * cfg.n_grid.len());
    for (ei, &eps) in cfg.eps_list.iter().enumerate() {
        for (ni, &n) in cfg.n_grid.iter().enumerate() {
            if let Plan::Number { nbar } = plan {
                if theta_true == 0.0 {
                    out.push(TailEstimate::exact(n, eps, number_exact_tail_at_zero(nbar, n, eps)));
                    continue;
                }
            }
            let trial = |t: u64| -> Result<Trial> {
                let mut rng = stream_rng(cfg.seed, &[ei as u64, ni as u64, t]);
                run_trial(&plan, family, theta_true, n, eps, tilted, &mut rng)
            };
            let trials: Vec<Trial> = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(trial)
                    .collect::<Result<Vec<_>>>()
            })?;
            out.push(summarize(n, eps, theta_true, &trials, tilted));
        }
    }
    Ok(out)
}

fn run_trial<F: StateFamily + ?Sized, R: Rng + ?Sized>(
    plan: &Plan<F>,
    family: &F,
    theta_true: f64,
    n: usize,
    eps: f64,
    tilted: bool,
    rng: &mut R,
) -> Result<Trial> {
    let mut trial = Trial::default();
    match plan {
        Plan::Fixed { theta0, values, probs } => {
            if tilted {
                let targets = [theta_true - eps - theta0, theta_true + eps - theta0];
                let tm = TiltedMean::new(values.clone(), probs.clone(), &targets);
                let (c, lw) = tm.sample(n, rng);
                trial.estimate = c.iter().zip(values).map(|(c, x)| *c as f64 * x).sum::<f64>() / n as f64 + theta0;
                trial.log_weight = lw;
            } else {
                trial.estimate = sample_mean(values, probs, n, rng) + theta0;
            }
        }
        Plan::TwoStage(p) => {
            let targets = if tilted { Some([theta_true - eps, theta_true + eps]) } else { None };
            let (o, lw) = p.run(n, targets, rng)?;
            trial.estimate = o.estimate;
            trial.clamped = o.clamped;
            trial.fallback = o.fallback;
            trial.log_weight = lw;
        }
        Plan::Superefficient { laws } => {
            let law = &laws[&n];
            let p: Vec<f64> = law.iter().map(|x| x.1).collect();
            trial.estimate = law[categorical(&p, rng)].0;
        }
        Plan::MAdaptive {
            theta0,
            povm,
            single,
            refined,
        } => {
            trial.estimate = m_adaptive_with(family, povm, *theta0, single, refined, n / povm.m(), rng)?;
        }
        Plan::Homodyne { var } => {
            let sd = (var / n as f64).sqrt();
            if tilted {
                // Equal mixture of means θ ± ε.
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let z: f64 = rng.sample(StandardNormal);
                let x = theta_true + side * eps + sd * z;
                let lp = |m: f64| -0.5 * ((x - m) / sd).powi(2);
                let lq = log_sum_exp(&[lp(theta_true + eps), lp(theta_true - eps)]) - 2f64.ln();
                trial.estimate = x;
                trial.log_weight = lp(theta_true) - lq;
            } else {
                trial.estimate = Normal::new(theta_true, sd).expect("positive sd").sample(rng);
            }
        }
        Plan::Number { nbar } => {
            trial.estimate = sample_number_estimate(*nbar, theta_true, n, rng);
        }
    }
    Ok(trial)
}

fn summarize(n: usize, eps: f64, theta_true: f64, trials: &[Trial], tilted: bool) -> TailEstimate {
    let in_tail = |t: &Trial| (t.estimate - theta_true).abs() >= eps;
    let hits = trials.iter().filter(|t| in_tail(t)).count() as u64;
    let clamp_events = trials.iter().filter(|t| t.clamped).count() as u64;
    let fallback_events = trials.iter().filter(|t| t.fallback).count() as u64;
    let m = trials.len() as u64;
    if !tilted {
        let mut e = TailEstimate::from_hits(n, eps, hits, m);
        e.clamp_events = clamp_events;
        e.fallback_events = fallback_events;
        return e;
    }
    // Weighted estimate, summed in trial order for reproducibility.
    let w: Vec<f64> = trials
        .iter()
        .map(|t| if in_tail(t) { t.log_weight.exp() } else { 0.0 })
        .collect();
    let mf = m as f64;
    let p = w.iter().sum::<f64>() / mf;
    let var = if m > 1 {
        w.iter().map(|x| (x - p).powi(2)).sum::<f64>() / (mf - 1.0)
    } else {
        0.0
    };
    let se = (var / mf).sqrt();
    TailEstimate {
        n,
        eps,
        hits,
        trials: m,
        p_hat: p,
        wilson_lo: (p - 1.959_963_984_540_054 * se).max(0.0),
        wilson_hi: (p + 1.959_963_984_540_054 * se).min(1.0),
        method: EstimateMethod::Tilted,
        rel_stderr: if p > 0.0 { se / p } else { f64::INFINITY },
        clamp_events,
        fallback_events,
    }
}

/// Regression slope of `−log p̂_n` against `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit {
    pub beta: f64,
    pub stderr: f64,
    pub used: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Weighted affine fit of `−log p̂_n = c + βn` over the usable grid points
/// (at least four are required).
pub fn extract_beta(estimates: &[TailEstimate]) -> Result<BetaFit> {
    let (usable, dropped): (Vec<&TailEstimate>, Vec<&TailEstimate>) = estimates.iter().partition(|e| e.usable());
    if usable.len() < 4 {
        return Err(Error::Estimation(format!(
            "need at least 4 usable grid points, have {} (n = {:?})",
            usable.len(),
            usable.iter().map(|e| e.n).collect::<Vec<_>>()
        )));
    }
    let x: Vec<f64> = usable.iter().map(|e| e.n as f64).collect();
    let y: Vec<f64> = usable.iter().map(|e| -e.p_hat.ln()).collect();
    let w: Vec<f64> = usable.iter().map(|e| 1.0 / e.log_variance().max(1e-300)).collect();
    let fit = weighted_line_fit(&x, &y, &w)
        .ok_or_else(|| Error::Estimation("degenerate n grid for the exponent regression".into()))?;
    Ok(BetaFit {
        beta: fit.slope,
        stderr: fit.slope_stderr,
        used: usable.iter().map(|e| e.n).collect(),
        dropped: dropped.iter().map(|e| e.n).collect(),
    })
}

/// Weighted fit of `β = α ε²` through the origin from `(ε, β̂, stderr)`
/// triples. Weights are `1/stderr²` when every stderr is positive and
/// uniform otherwise.
pub fn extract_alpha(points: &[(f64, f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Estimation(format!(
            "need at least 3 epsilon points, have {}",
            points.len()
        )));
    }
    let weighted = points.iter().all(|p| p.2 > 0.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(eps, beta, se) in points {
        let w = if weighted { 1.0 / (se * se) } else { 1.0 };
        let e2 = eps * eps;
        num += w * e2 * beta;
        den += w * e2 * e2;
    }
    Ok(num / den)
}

/// `J/2`, `J̃/2` and the relative-entropy infimum near θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalBounds {
    pub j_half: f64,
    pub jt_half: f64,
    /// `inf { D(ρ_θ′‖ρ_θ) : |θ′ − θ| ≥ ε }`, the set used in the proof.
    pub inf_d: f64,
    /// `inf { D(ρ_θ′‖ρ_θ) : |θ′ − θ| < ε }`, the set as printed; always 0.
    pub inf_d_printed: f64,
}

pub fn theoretical_bounds<F: StateFamily + ?Sized>(family: &F, theta: f64, eps: f64) -> Result<TheoreticalBounds> {
    if !(eps > 0.0) {
        return Err(Error::Validation(format!("epsilon {eps} must be positive")));
    }
    let rho = family.state(theta)?;
    let b = family.derivative(theta)?;
    let (_, j) = sld_and_fisher(&rho, &b)?;
    let jt = kmb_fisher(&rho, &b)?;
    let closed = family.closed_forms();
    let d = |t: f64| -> f64 {
        match &closed {
            Some(cf) => (cf.d)(t, theta),
            None => family_relative_entropy(family, t, theta).unwrap_or(f64::INFINITY),
        }
    };
    let (lo, hi) = search_interval(&family.domain());
    let step = 1e-3;
    let mut best = f64::INFINITY;
    let mut best_t = f64::NAN;
    let consider = |t: f64, best: &mut f64, best_t: &mut f64| {
        let v = d(t);
        if v < *best {
            *best = v;
            *best_t = t;
        }
    };
    for side in [1.0, -1.0] {
        let start = theta + side * eps;
        if start < lo || start > hi {
            continue;
        }
        let end = if side > 0.0 { hi } else { lo };
        let count = ((end - start).abs() / step).floor() as usize;
        for k in 0..=count {
            consider(start + side * k as f64 * step, &mut best, &mut best_t);
        }
        consider(end, &mut best, &mut best_t);
    }
    if best_t.is_finite() {
        // Local refinement on the feasible side of the grid winner.
        let side = if best_t >= theta { 1.0 } else { -1.0 };
        let a = (best_t - step).max(lo);
        let b = (best_t + step).min(hi);
        let (a, b) = if side > 0.0 { (a.max(theta + eps), b) } else { (a, b.min(theta - eps)) };
        if b > a {
            let (_, v) = golden_section_max(|t| -d(t), a, b, 1e-12);
            if -v < best {
                best = -v;
            }
        }
    }
    Ok(TheoreticalBounds {
        j_half: j / 2.0,
        jt_half: jt / 2.0,
        inf_d: best,
        inf_d_printed: d(theta).max(0.0),
    })
}

/// Per-ε exponent estimate with its theoretical comparison values.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub eps: f64,
    /// `None` when too few grid points were usable.
    pub fit: Option<BetaFit>,
    pub bounds: TheoreticalBounds,
}

/// Exponent curve over ε.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    pub alpha: Option<f64>,
    /// The regression cannot distinguish limsup and liminf exponents.
    pub note: &'static str,
}

pub const RATE_NOTE: &str =
    "finite-n regression slope; the limsup and liminf exponents are not distinguished at finite n";

/// Builds the exponent curve from simulated tail estimates.
pub fn rate_curve<F: StateFamily + ?Sized>(estimates: &[TailEstimate], family: &F, theta: f64) -> Result<RateCurve> {
    let mut eps_values: Vec<f64> = Vec::new();
    for e in estimates {
        if !eps_values.contains(&e.eps) {
            eps_values.push(e.eps);
        }
    }
    let mut points = Vec::with_capacity(eps_values.len());
    for &eps in &eps_values {
        let group: Vec<TailEstimate> = estimates.iter().filter(|e| e.eps == eps).cloned().collect();
        points.push(RatePoint {
            eps,
            fit: extract_beta(&group).ok(),
            bounds: theoretical_bounds(family, theta, eps)?,
        });
    }
    let triples: Vec<(f64, f64, f64)> = points
        .iter()
        .filter_map(|p| p.fit.as_ref().map(|f| (p.eps, f.beta, f.stderr)))
        .collect();
    Ok(RateCurve {
        points,
        alpha: extract_alpha(&triples).ok(),
        note: RATE_NOTE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{EquatorialQubitFamily, GaussianFockFamily};

    #[test]
    fn synthetic_exponential_slope() {
        let est: Vec<TailEstimate> = (1..=8)
            .map(|k| TailEstimate::exact(50 * k, 0.1, (-0.05 * 50.0 * k as f64).exp()))
            .collect();
        let fit = extract_beta(&est).unwrap();
        assert!((fit.beta - 0.05).abs() < 1e-6);
    }

    #[test]
    fn synthetic_staircase_slope() {
        let est: Vec<TailEstimate> = (1..=8)
            .map(|k| TailEstimate::exact(50 * k, 0.5, number_exact_tail_at_zero(1.0, 50 * k, 0.5)))
            .collect();
        let fit = extract_beta(&est).unwrap();
        let want = 0.25 * 2f64.ln();
        assert!((fit.beta - want).abs() / want < 0.02);
    }

    #[test]
    fn alpha_from_exact_quadratic() {
        let pts: Vec<(f64, f64, f64)> = [0.1, 0.2, 0.3].iter().map(|&e| (e, 0.7 * e * e, 0.01)).collect();
        assert!((extract_alpha(&pts).unwrap() - 0.7).abs() < 1e-10);
        assert!(extract_alpha(&pts[..2]).is_err());
    }

    #[test]
    fn too_few_points_is_an_error() {
        let est = vec![TailEstimate::from_hits(10, 0.1, 3, 100); 5];
        match extract_beta(&est) {
            Err(Error::Estimation(m)) => assert!(m.contains("have 0")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mgf_basics() {
        let f = EquatorialQubitFamily::new(0.8).unwrap();
        assert!((mgf_phi(&f, 0.3, 0.5, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let h = 1e-4;
        let fd = (mgf_phi(&f, 0.3, 0.5, h).unwrap() - 2.0 + mgf_phi(&f, 0.3, 0.5, -h).unwrap()) / (h * h);
        assert!((fd - mgf_curvature(&f, 0.3, 0.5).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn tilted_weights_are_unbiased_for_the_total() {
        let tm = TiltedMean::new(vec![-1.0, 1.0], vec![0.3, 0.7], &[0.9, -0.5]);
        let mut rng = stream_rng(3, &[0]);
        let m = 20000;
        let s: f64 = (0..m).map(|_| tm.sample(20, &mut rng).1.exp()).sum::<f64>() / m as f64;
        assert!((s - 1.0).abs() < 0.05);
    }

    #[test]
    fn gaussian_strategy_needs_gaussian_family() {
        let f = EquatorialQubitFamily::new(0.5).unwrap();
        let cfg = SimulationConfig::new(vec![10], vec![0.1], 10, 1);
        let r = simulate_tail(StrategySpec::GaussianHomodyne { nbar: 1.0 }, &f, 0.0, &cfg);
        assert!(matches!(r, Err(Error::Configuration(_))));
        let g = GaussianFockFamily::new(2.0, 60).unwrap();
        let r = simulate_tail(StrategySpec::GaussianHomodyne { nbar: 1.0 }, &g, 0.0, &cfg);
        assert!(matches!(r, Err(Error::Configuration(_))));
    }
}
