//! Exponential families on finite outcome sets.
//!
//! A family is `p_θ(ω) = p(ω) exp(Σ_i θ^i F_i(ω) − ψ(θ))`. Everything is
//! evaluated in log space with max subtraction so that tail probabilities at
//! large sample sizes stay representable.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::stats;

/// `log Σ exp(x_i)` with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Binary entropy in nats.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
    term(x) + term(1.0 - x)
}

/// Classical KL divergence `Σ p log(p/q)`. Outcomes with `p = 0` contribute
/// nothing; `p > 0` with `q = 0` gives `+∞`.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        d += a * (a / b).ln();
    }
    d.max(0.0)
}

/// Finite-outcome exponential family.
#[derive(Debug, Clone)]
pub struct ExponentialFamily {
    labels: Vec<f64>,
    log_base: Vec<f64>,
    // statistics[ω][i]
    statistics: Vec<Vec<f64>>,
    dim: usize,
    condition: f64,
}

/// Which side of a threshold a halfspace event keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `mean ≥ a`
    Upper,
    /// `mean ≤ a`
    Lower,
}

/// The event `{F̄_i ≥ a}` or `{F̄_i ≤ a}` for the empirical mean of one statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub index: usize,
    pub threshold: f64,
    pub side: Side,
}

impl ExponentialFamily {
    /// Builds a family from outcome labels, positive base weights and the
    /// statistics table `statistics[ω][i]`.
    pub fn new(labels: Vec<f64>, base_weights: Vec<f64>, statistics: Vec<Vec<f64>>) -> Result<Self> {
        let k = labels.len();
        if k < 2 || base_weights.len() != k || statistics.len() != k {
            return Err(Error::Validation(
                "labels, base weights and statistics must have one entry per outcome (at least two)".into(),
            ));
        }
        if base_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Validation("base weights must be positive and finite".into()));
        }
        let dim = statistics[0].len();
        if dim == 0 || statistics.iter().any(|s| s.len() != dim || s.iter().any(|v| !v.is_finite())) {
            return Err(Error::Validation("statistics must be finite with a common positive dimension".into()));
        }
        let total: f64 = base_weights.iter().sum();
        let w: Vec<f64> = base_weights.iter().map(|b| b / total).collect();
        let mut mean = vec![0.0; dim];
        for (s, wi) in statistics.iter().zip(&w) {
            for i in 0..dim {
                mean[i] += wi * s[i];
            }
        }
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        for (s, wi) in statistics.iter().zip(&w) {
            for i in 0..dim {
                for j in 0..dim {
                    gram[(i, j)] += wi * (s[i] - mean[i]) * (s[j] - mean[j]);
                }
            }
        }
        let ev = gram.symmetric_eigen().eigenvalues;
        let max = ev.iter().cloned().fold(0.0, f64::max);
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min <= 1e-13 * max {
            return Err(Error::Structure(format!(
                "statistics are affinely dependent (Gram eigenvalues {min:e}..{max:e})"
            )));
        }
        Ok(Self {
            labels,
            log_base: base_weights.iter().map(|b| b.ln()).collect(),
            statistics,
            dim,
            condition: max / min,
        })
    }

    /// Bernoulli family on `{0, 1}` with `F = id` and uniform base measure.
    pub fn bernoulli() -> Self {
        Self::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![vec![0.0], vec![1.0]]).expect("valid")
    }

    /// Full multinomial family on `k` outcomes with base distribution `base`.
    /// Statistics are the indicators of outcomes `1..k`; the natural parameter
    /// zero reproduces `base`.
    pub fn multinomial(base: &[f64]) -> Result<Self> {
        let k = base.len();
        let stats = (0..k)
            .map(|w| (1..k).map(|i| if i == w { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new((0..k).map(|i| i as f64).collect(), base.to_vec(), stats)
    }

    /// One-statistic family with `F(ω) = label(ω)`.
    pub fn scalar(labels: Vec<f64>, base_weights: Vec<f64>) -> Result<Self> {
        let stats = labels.iter().map(|&l| vec![l]).collect();
        Self::new(labels, base_weights, stats)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_outcomes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn statistic(&self, outcome: usize) -> &[f64] {
        &self.statistics[outcome]
    }

    /// Condition number of the centred Gram matrix of the statistics.
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Validation(format!(
                "expected {} natural parameters, got {}",
                self.dim,
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Validation("natural parameters must be finite".into()));
        }
        Ok(())
    }

    fn exponents(&self, theta: &[f64]) -> Vec<f64> {
        self.statistics
            .iter()
            .zip(&self.log_base)
            .map(|(s, lb)| lb + s.iter().zip(theta).map(|(f, t)| f * t).sum::<f64>())
            .collect()
    }

    /// `(ψ(θ), η(θ))`.
    pub fn potential_and_mean(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(theta)?;
        let e = self.exponents(theta);
        let psi = log_sum_exp(&e);
        let mut eta = vec![0.0; self.dim];
        for (s, x) in self.statistics.iter().zip(&e) {
            let p = (x - psi).exp();
            for i in 0..self.dim {
                eta[i] += p * s[i];
            }
        }
        Ok((psi, eta))
    }

    /// `log p_θ(ω)` for every outcome.
    pub fn log_probabilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let e = self.exponents(theta);
        let psi = log_sum_exp(&e);
        Ok(e.into_iter().map(|x| x - psi).collect())
    }

    pub fn probabilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.log_probabilities(theta)?.into_iter().map(f64::exp).collect())
    }

    /// Covariance of the statistics, i.e. the Fisher information matrix in
    /// natural coordinates.
    pub fn fisher_matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let (_, eta) = self.potential_and_mean(theta)?;
        let p = self.probabilities(theta)?;
        let mut h = DMatrix::<f64>::zeros(self.dim, self.dim);
        for (s, pw) in self.statistics.iter().zip(&p) {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    h[(i, j)] += pw * (s[i] - eta[i]) * (s[j] - eta[j]);
                }
            }
        }
        Ok(h)
    }

    /// Dual form `D(θ‖θ0) = (θ − θ0)·η(θ) + ψ(θ0) − ψ(θ)`.
    pub fn kl(&self, theta: &[f64], theta0: &[f64]) -> Result<f64> {
        let (psi, eta) = self.potential_and_mean(theta)?;
        let (psi0, _) = self.potential_and_mean(theta0)?;
        let lin: f64 = theta.iter().zip(theta0).zip(&eta).map(|((a, b), e)| (a - b) * e).sum();
        Ok((lin + psi0 - psi).max(0.0))
    }

    /// Moment-matching maximum likelihood estimate by damped Newton.
    pub fn mle(&self, means: &[f64]) -> Result<Vec<f64>> {
        if means.len() != self.dim {
            return Err(Error::Validation(format!(
                "expected {} empirical means, got {}",
                self.dim,
                means.len()
            )));
        }
        for i in 0..self.dim {
            let lo = self.statistics.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min);
            let hi = self.statistics.iter().map(|s| s[i]).fold(f64::NEG_INFINITY, f64::max);
            if !(means[i] > lo && means[i] < hi) {
                return Err(Error::Boundary(format!(
                    "empirical mean of statistic {i} is {} but must lie strictly inside ({lo}, {hi})",
                    means[i]
                )));
            }
        }
        let m = DVector::from_column_slice(means);
        let objective = |t: &[f64]| -> Result<(f64, DVector<f64>)> {
            let (psi, eta) = self.potential_and_mean(t)?;
            let val = psi - t.iter().zip(means).map(|(a, b)| a * b).sum::<f64>();
            Ok((val, DVector::from_vec(eta) - &m))
        };
        let mut theta = vec![0.0; self.dim];
        let (mut val, mut grad) = objective(&theta)?;
        for _ in 0..200 {
            if grad.amax() <= 1e-12 {
                return Ok(theta);
            }
            let h = self.fisher_matrix(&theta)?;
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    let ridge = h + DMatrix::identity(self.dim, self.dim) * 1e-12;
                    ridge.lu().solve(&(-&grad)).unwrap_or_else(|| -grad.clone())
                }
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                if let Ok((v, g)) = objective(&cand) {
                    if v < val || (v <= val + 1e-15 * val.abs().max(1.0) && g.amax() < grad.amax()) {
                        theta = cand;
                        val = v;
                        grad = g;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if grad.amax() <= 1e-10 {
            return Ok(theta);
        }
        let worst = grad.iamax();
        Err(Error::Boundary(format!(
            "moment matching did not converge (residual {:e} in statistic {worst}); empirical means are on or outside the boundary of the mean polytope",
            grad.amax()
        )))
    }

    /// Cramér rate of the halfspace event for the empirical mean of one
    /// statistic under `p_θ0`. The rate is the Legendre transform of the
    /// log-moment generating function of `F_i`, evaluated at the threshold
    /// if it lies on the far side of the mean and zero otherwise.
    pub fn cramer_rate(&self, theta0: &[f64], hs: Halfspace) -> Result<f64> {
        if hs.index >= self.dim {
            return Err(Error::Validation(format!("statistic index {} out of range", hs.index)));
        }
        let logp = self.log_probabilities(theta0)?;
        let sign = match hs.side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        };
        // Work with G = sign·F_i so that the event is always {Ḡ ≥ a}.
        let g: Vec<f64> = self.statistics.iter().map(|s| sign * s[hs.index]).collect();
        let a = sign * hs.threshold;
        Ok(upper_tail_rate(&g, &logp, a))
    }

    /// Monte-Carlo estimate of `P(F̄_i ∈ halfspace)` for `n` i.i.d. draws.
    /// Returns the hit count over `trials`.
    pub fn sample_tail_hits<R: Rng + ?Sized>(
        &self,
        theta0: &[f64],
        hs: Halfspace,
        n: u64,
        trials: u64,
        rng: &mut R,
    ) -> Result<u64> {
        let p = self.probabilities(theta0)?;
        let f: Vec<f64> = self.statistics.iter().map(|s| s[hs.index]).collect();
        let target = hs.threshold * n as f64;
        let slack = 1e-9 * (1.0 + target.abs());
        let mut hits = 0;
        for _ in 0..trials {
            let counts = stats::multinomial(n, &p, rng);
            let sum: f64 = counts.iter().zip(&f).map(|(&c, v)| c as f64 * v).sum();
            let hit = match hs.side {
                Side::Upper => sum >= target - slack,
                Side::Lower => sum <= target + slack,
            };
            if hit {
                hits += 1;
            }
        }
        Ok(hits)
    }

    /// Same event as [`Self::sample_tail_hits`], estimated under the
    /// exponentially tilted law whose mean sits on the threshold. The
    /// likelihood-ratio weights keep the estimate unbiased.
    pub fn sample_tail_tilted<R: Rng + ?Sized>(
        &self,
        theta0: &[f64],
        hs: Halfspace,
        n: u64,
        trials: u64,
        rng: &mut R,
    ) -> Result<TiltedTail> {
        if trials == 0 {
            return Err(Error::Validation("trials must be positive".into()));
        }
        let logp = self.log_probabilities(theta0)?;
        let sign = match hs.side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        };
        let g: Vec<f64> = self.statistics.iter().map(|s| sign * s[hs.index]).collect();
        let a = sign * hs.threshold;
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean: f64 = g.iter().zip(&logp).map(|(v, lp)| v * lp.exp()).sum();
        let t = if a > mean && a < gmax { tilt_for_mean(&g, &logp, a) } else { 0.0 };
        let lam = log_mgf(&g, &logp, t);
        let q: Vec<f64> = g.iter().zip(&logp).map(|(v, lp)| (lp + t * v - lam).exp()).collect();
        let target = a * n as f64;
        let slack = 1e-9 * (1.0 + target.abs());
        let nf = n as f64;
        let mut hits = 0;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let counts = stats::multinomial(n, &q, rng);
            let s: f64 = counts.iter().zip(&g).map(|(&c, v)| c as f64 * v).sum();
            if s >= target - slack {
                hits += 1;
                let w = (nf * lam - t * s).exp();
                sum += w;
                sum_sq += w * w;
            }
        }
        let m = trials as f64;
        let p_hat = sum / m;
        let var = if trials > 1 { (sum_sq - m * p_hat * p_hat).max(0.0) / (m - 1.0) } else { 0.0 };
        Ok(TiltedTail {
            p_hat,
            stderr: (var / m).sqrt(),
            hits,
        })
    }
}

/// Importance-sampled tail probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedTail {
    pub p_hat: f64,
    pub stderr: f64,
    /// Proposal draws that landed in the event.
    pub hits: u64,
}

/// `sup_{t ≥ 0} (t a − log Σ p(ω) e^{t g(ω)})`.
fn upper_tail_rate(g: &[f64], logp: &[f64], a: f64) -> f64 {
    let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean: f64 = g.iter().zip(logp).map(|(v, lp)| v * lp.exp()).sum();
    let tol = 1e-12 * (1.0 + gmax.abs());
    if a > gmax + tol {
        return f64::INFINITY;
    }
    if a >= gmax - tol {
        let top: Vec<f64> = g
            .iter()
            .zip(logp)
            .filter(|(v, _)| **v >= gmax - tol)
            .map(|(_, lp)| *lp)
            .collect();
        return -log_sum_exp(&top);
    }
    if a <= mean {
        return 0.0;
    }
    let t = tilt_for_mean(g, logp, a);
    (t * a - log_mgf(g, logp, t)).max(0.0)
}

fn log_mgf(g: &[f64], logp: &[f64], t: f64) -> f64 {
    let e: Vec<f64> = g.iter().zip(logp).map(|(v, lp)| lp + t * v).collect();
    log_sum_exp(&e)
}

/// Tilt `t ≥ 0` with `Λ'(t) = a`, for a strictly between the mean and the
/// largest value of `g`.
fn tilt_for_mean(g: &[f64], logp: &[f64], a: f64) -> f64 {
    let slope = |t: f64| -> f64 {
        let l = log_mgf(g, logp, t);
        g.iter().zip(logp).map(|(v, lp)| v * (lp + t * v - l).exp()).sum()
    };
    // Λ'(t) increases from the mean towards max g; bracket the root.
    let mut hi = 1.0;
    while slope(hi) < a {
        hi *= 2.0;
        if hi > 1e8 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// A one-parameter curve inside some ambient model, seen through the two
/// divergences that the projection estimator needs.
pub trait CurveModel {
    /// Ambient data point, e.g. natural parameters or an empirical distribution.
    type Point: ?Sized;

    /// Closed parameter range searched by the grid.
    fn grid_bounds(&self) -> (f64, f64);

    /// `D(x‖u)`: divergence from the data point to the curve point `u`.
    fn divergence_to_curve(&self, x: &Self::Point, u: f64) -> f64;

    /// `D(u‖u0)` between two curve points.
    fn divergence_on_curve(&self, u: f64, u0: f64) -> f64;
}

/// Curved subfamily of an exponential family.
pub struct CurvedFamily {
    ambient: ExponentialFamily,
    embedding: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    bounds: (f64, f64),
}

impl CurvedFamily {
    pub fn new<F>(ambient: ExponentialFamily, embedding: F, bounds: (f64, f64)) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        if !(bounds.0.is_finite() && bounds.1.is_finite() && bounds.0 < bounds.1) {
            return Err(Error::Configuration("curve grid bounds must be finite and increasing".into()));
        }
        let probe = embedding(bounds.0);
        if probe.len() != ambient.dim() {
            return Err(Error::Validation("embedding dimension does not match the ambient family".into()));
        }
        Ok(Self {
            ambient,
            embedding: Box::new(embedding),
            bounds,
        })
    }

    pub fn ambient(&self) -> &ExponentialFamily {
        &self.ambient
    }

    pub fn embed(&self, u: f64) -> Vec<f64> {
        (self.embedding)(u)
    }
}

impl CurveModel for CurvedFamily {
    type Point = [f64];

    fn grid_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn divergence_to_curve(&self, x: &[f64], u: f64) -> f64 {
        self.ambient.kl(x, &self.embed(u)).unwrap_or(f64::INFINITY)
    }

    fn divergence_on_curve(&self, u: f64, u0: f64) -> f64 {
        self.ambient.kl(&self.embed(u), &self.embed(u0)).unwrap_or(f64::INFINITY)
    }
}

/// Constrained projection `argmin_u { D(x‖u) : D(u‖u0) ≤ D(x‖u0) }` on a
/// coarse grid (step 1e−2) refined around the coarse winner (step 1e−5).
/// Ties go to the smallest parameter.
pub fn projection_estimator<M: CurveModel>(model: &M, x: &M::Point, u0: f64) -> Result<f64> {
    let (lo, hi) = model.grid_bounds();
    let budget = model.divergence_to_curve(x, u0);
    let feasible = |u: f64| model.divergence_on_curve(u, u0) <= budget + 1e-12 * (1.0 + budget.abs());
    let scan = |a: f64, b: f64, step: f64, extra: Option<f64>| -> Option<(f64, f64)> {
        let count = ((b - a) / step).round() as usize;
        let mut pts: Vec<f64> = (0..=count).map(|k| (a + k as f64 * step).min(b)).collect();
        if let Some(e) = extra {
            pts.push(e);
            pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
        }
        let mut best: Option<(f64, f64)> = None;
        for u in pts {
            if !feasible(u) {
                continue;
            }
            let v = model.divergence_to_curve(x, u);
            match best {
                Some((_, bv)) if !(v < bv - 1e-15 * (1.0 + bv.abs())) => {}
                _ => best = Some((u, v)),
            }
        }
        best
    };
    let extra = if u0 >= lo && u0 <= hi { Some(u0) } else { None };
    let (coarse, _) = scan(lo, hi, 1e-2, extra)
        .ok_or_else(|| Error::Feasibility("no grid point satisfies the divergence constraint".into()))?;
    let a = (coarse - 1e-2).max(lo);
    let b = (coarse + 1e-2).min(hi);
    let (fine, _) = scan(a, b, 1e-5, Some(coarse)).expect("coarse winner is feasible");
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_mean_is_logistic() {
        let f = ExponentialFamily::bernoulli();
        for &t in &[-3.0, -0.5, 0.0, 1.2, 4.0] {
            let (_, eta) = f.potential_and_mean(&[t]).unwrap();
            assert!((eta[0] - t.exp() / (1.0 + t.exp())).abs() < 1e-14);
        }
        let (psi, eta) = f.potential_and_mean(&[0.0]).unwrap();
        assert!((psi - 2f64.ln()).abs() < 1e-15);
        assert!((eta[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn potential_gradient_matches_mean() {
        let f = ExponentialFamily::multinomial(&[0.2, 0.3, 0.5]).unwrap();
        let t = [0.4, -1.1];
        let (_, eta) = f.potential_and_mean(&t).unwrap();
        for i in 0..2 {
            let h = 1e-5;
            let mut a = t;
            let mut b = t;
            a[i] += h;
            b[i] -= h;
            let d = (f.potential_and_mean(&a).unwrap().0 - f.potential_and_mean(&b).unwrap().0) / (2.0 * h);
            assert!((d - eta[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn bernoulli_kl_value() {
        let f = ExponentialFamily::bernoulli();
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let d = f.kl(&[logit(0.7)], &[logit(0.5)]).unwrap();
        let direct = 0.7 * 1.4f64.ln() + 0.3 * 0.6f64.ln();
        assert!((d - direct).abs() < 1e-12);
        assert!((d - 0.08228).abs() < 1e-5);
    }

    #[test]
    fn mle_recovers_parameters() {
        let f = ExponentialFamily::multinomial(&[0.25, 0.25, 0.5]).unwrap();
        let t = [0.7, -0.3];
        let (_, eta) = f.potential_and_mean(&t).unwrap();
        let th = f.mle(&eta).unwrap();
        assert!((th[0] - t[0]).abs() < 1e-8 && (th[1] - t[1]).abs() < 1e-8);
    }

    #[test]
    fn mle_rejects_boundary() {
        let f = ExponentialFamily::bernoulli();
        assert!(matches!(f.mle(&[1.0]), Err(Error::Boundary(_))));
        assert!(matches!(f.mle(&[-0.1]), Err(Error::Boundary(_))));
    }

    #[test]
    fn cramer_rate_bernoulli() {
        let f = ExponentialFamily::bernoulli();
        let t0 = [(0.4f64 / 0.6).ln()];
        let hs = Halfspace { index: 0, threshold: 0.6, side: Side::Upper };
        let r = f.cramer_rate(&t0, hs).unwrap();
        let kl = 0.6 * (0.6f64 / 0.4).ln() + 0.4 * (0.4f64 / 0.6).ln();
        assert!((r - kl).abs() < 1e-10);
        assert!((r - 0.08109).abs() < 1e-5);
        let at_mean = Halfspace { threshold: 0.4, ..hs };
        assert_eq!(f.cramer_rate(&t0, at_mean).unwrap(), 0.0);
        let outside = Halfspace { threshold: 1.5, ..hs };
        assert!(f.cramer_rate(&t0, outside).unwrap().is_infinite());
        let extreme = Halfspace { threshold: 1.0, ..hs };
        assert!((f.cramer_rate(&t0, extreme).unwrap() + 0.4f64.ln()).abs() < 1e-12);
        let lower = Halfspace { threshold: 0.2, side: Side::Lower, ..hs };
        let kl2 = 0.2 * (0.2f64 / 0.4).ln() + 0.8 * (0.8f64 / 0.6).ln();
        assert!((f.cramer_rate(&t0, lower).unwrap() - kl2).abs() < 1e-10);
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn projection_on_curve_returns_parameter() {
        let amb = ExponentialFamily::multinomial(&[1.0, 1.0, 1.0]).unwrap();
        let curve = CurvedFamily::new(amb, |u| vec![u, u * u], (-2.0, 2.0)).unwrap();
        let x = curve.embed(0.537);
        let u = projection_estimator(&curve, &x, 0.0).unwrap();
        assert!((u - 0.537).abs() <= 1e-5);
    }
}
