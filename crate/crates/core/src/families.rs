//! One-parameter state families θ ↦ ρ_θ.
//!
//! Concrete families: the equatorial qubit, the displaced thermal state in a
//! truncated Fock space (on the real line or on the half-line `[0, ∞)`), the
//! diagonal embedding of a classical exponential family, and a closure-backed
//! family for anything else.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expfam::ExponentialFamily;
use crate::linalg::{
    c, cr, eig_hermitian, Complex, ComplexMatrix, DensityMatrix, HermitianOperator, SpectralDecomposition,
};

/// One end of a parameter interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Open(f64),
    Closed(f64),
    Unbounded,
}

/// Real parameter interval Θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lower: Bound,
    pub upper: Bound,
}

impl Domain {
    pub fn real_line() -> Self {
        Self {
            lower: Bound::Unbounded,
            upper: Bound::Unbounded,
        }
    }

    pub fn open(a: f64, b: f64) -> Self {
        Self {
            lower: Bound::Open(a),
            upper: Bound::Open(b),
        }
    }

    pub fn half_line() -> Self {
        Self {
            lower: Bound::Closed(0.0),
            upper: Bound::Unbounded,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        let lo = match self.lower {
            Bound::Open(a) => t > a,
            Bound::Closed(a) => t >= a,
            Bound::Unbounded => true,
        };
        let hi = match self.upper {
            Bound::Open(b) => t < b,
            Bound::Closed(b) => t <= b,
            Bound::Unbounded => true,
        };
        lo && hi
    }

    /// Finite endpoints, with `±∞` for unbounded ends.
    pub fn endpoints(&self) -> (f64, f64) {
        let v = |b: Bound, inf: f64| match b {
            Bound::Open(x) | Bound::Closed(x) => x,
            Bound::Unbounded => inf,
        };
        (v(self.lower, f64::NEG_INFINITY), v(self.upper, f64::INFINITY))
    }

    pub fn require(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("parameter {t} is outside the family domain {self}")))
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lower {
            Bound::Open(a) => write!(f, "({a}, ")?,
            Bound::Closed(a) => write!(f, "[{a}, ")?,
            Bound::Unbounded => write!(f, "(-inf, ")?,
        }
        match self.upper {
            Bound::Open(b) => write!(f, "{b})"),
            Bound::Closed(b) => write!(f, "{b}]"),
            Bound::Unbounded => write!(f, "inf)"),
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Closed-form `D(ρ_θ‖ρ_θ0)`, `J_θ` and `J̃_θ` of a family.
#[derive(Clone)]
pub struct ClosedFormTriple {
    pub d: PairFn,
    pub j_sld: ScalarFn,
    pub j_kmb: ScalarFn,
}

impl fmt::Debug for ClosedFormTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosedFormTriple")
    }
}

/// A parametrized curve of density matrices.
pub trait StateFamily: Send + Sync {
    fn dim(&self) -> usize;

    fn domain(&self) -> Domain;

    fn state(&self, theta: f64) -> Result<DensityMatrix>;

    /// `dρ_θ/dθ`. Defaults to a finite difference with step
    /// `1e−5·max(1, |θ|)`.
    fn derivative(&self, theta: f64) -> Result<HermitianOperator> {
        finite_difference(self, theta, default_step(theta))
    }

    /// Closed-form reference quantities, where the family has them.
    fn closed_forms(&self) -> Option<ClosedFormTriple> {
        None
    }

    /// `log ρ_θ` on the support, for families whose spectrum is known
    /// exactly. Lets divergences avoid re-diagonalizing states whose tail
    /// eigenvalues sit below double precision.
    fn log_state(&self, _theta: f64) -> Option<Result<HermitianOperator>> {
        None
    }

    /// Mean photon number for the displaced thermal families.
    fn gaussian_nbar(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

/// Default finite-difference step.
pub fn default_step(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// `dρ_θ/dθ` through the family's own derivative.
pub fn derivative<F: StateFamily + ?Sized>(family: &F, theta: f64) -> Result<HermitianOperator> {
    family.derivative(theta)
}

/// Second-order finite difference: central in the interior, one-sided when
/// one neighbour falls outside Θ (as at the closed end of a half-line).
pub fn finite_difference<F: StateFamily + ?Sized>(family: &F, theta: f64, h: f64) -> Result<HermitianOperator> {
    let dom = family.domain();
    dom.require(theta)?;
    let m = |t: f64| -> Result<ComplexMatrix> { Ok(family.state(t)?.matrix().clone()) };
    let out = if dom.contains(theta - h) && dom.contains(theta + h) {
        (m(theta + h)? - m(theta - h)?) / cr(2.0 * h)
    } else if dom.contains(theta + 2.0 * h) && !dom.contains(theta - h) {
        let at_boundary = matches!(dom.lower, Bound::Closed(a) if a == theta);
        if !at_boundary && matches!(dom.lower, Bound::Open(_)) {
            return Err(Error::Domain(format!("parameter {theta} is too close to the open boundary of {dom}")));
        }
        (m(theta)? * cr(-3.0) + m(theta + h)? * cr(4.0) - m(theta + 2.0 * h)?) / cr(2.0 * h)
    } else if dom.contains(theta - 2.0 * h) && !dom.contains(theta + h) {
        let at_boundary = matches!(dom.upper, Bound::Closed(b) if b == theta);
        if !at_boundary && matches!(dom.upper, Bound::Open(_)) {
            return Err(Error::Domain(format!("parameter {theta} is too close to the open boundary of {dom}")));
        }
        (m(theta)? * cr(3.0) - m(theta - h)? * cr(4.0) + m(theta - 2.0 * h)?) / cr(2.0 * h)
    } else {
        return Err(Error::Domain(format!("no finite-difference stencil of step {h} fits in {dom}")));
    };
    Ok(HermitianOperator::from_hermitian_part(out))
}

fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

/// `ρ_θ = (I + r cos θ Z + r sin θ X)/2`.
pub fn equatorial_state(r: f64, theta: f64) -> Result<DensityMatrix> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("equatorial radius r = {r} must lie in (0, 1]")));
    }
    if !theta.is_finite() {
        return Err(Error::Domain("theta must be finite".into()));
    }
    let m = (ComplexMatrix::identity(2, 2) + pauli_z() * cr(r * theta.cos()) + pauli_x() * cr(r * theta.sin()))
        * cr(0.5);
    Ok(DensityMatrix::from_trusted(m))
}

/// Closed forms of the equatorial family. At `r = 1` the KMB information and
/// the divergence are infinite.
pub fn equatorial_closed_forms(r: f64) -> ClosedFormTriple {
    let log_ratio = if r >= 1.0 {
        f64::INFINITY
    } else {
        ((1.0 + r) / (1.0 - r)).ln()
    };
    ClosedFormTriple {
        d: Arc::new(move |t, t0| {
            let c = 1.0 - (t - t0).cos();
            if c == 0.0 {
                0.0
            } else {
                0.5 * r * c * log_ratio
            }
        }),
        j_sld: Arc::new(move |_| r * r),
        j_kmb: Arc::new(move |_| 0.5 * r * log_ratio),
    }
}

/// Closed forms of the displaced thermal family.
pub fn gaussian_closed_forms(nbar: f64) -> ClosedFormTriple {
    let l = (1.0 + 1.0 / nbar).ln();
    ClosedFormTriple {
        d: Arc::new(move |t, t0| l * (t - t0) * (t - t0)),
        j_sld: Arc::new(move |_| 2.0 / (nbar + 0.5)),
        j_kmb: Arc::new(move |_| 2.0 * l),
    }
}

/// Equatorial spin-1/2 family on Θ = (−π, π).
#[derive(Debug, Clone, Copy)]
pub struct EquatorialQubitFamily {
    r: f64,
}

impl EquatorialQubitFamily {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::Domain(format!("equatorial radius r = {r} must lie in (0, 1]")));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

impl StateFamily for EquatorialQubitFamily {
    fn dim(&self) -> usize {
        2
    }

    fn domain(&self) -> Domain {
        Domain::open(-std::f64::consts::PI, std::f64::consts::PI)
    }

    fn state(&self, theta: f64) -> Result<DensityMatrix> {
        self.domain().require(theta)?;
        equatorial_state(self.r, theta)
    }

    fn derivative(&self, theta: f64) -> Result<HermitianOperator> {
        self.domain().require(theta)?;
        let m = (pauli_z() * cr(-theta.sin()) + pauli_x() * cr(theta.cos())) * cr(0.5 * self.r);
        Ok(HermitianOperator::from_hermitian_part(m))
    }

    fn closed_forms(&self) -> Option<ClosedFormTriple> {
        Some(equatorial_closed_forms(self.r))
    }

    fn name(&self) -> String {
        format!("equatorial(r={})", self.r)
    }
}

/// Smallest truncation meeting the tail budget at displacement `theta`.
pub fn suggested_truncation(nbar: f64, theta: f64, tail_tol: f64) -> usize {
    let q = nbar / (nbar + 1.0);
    let allowance = 1.0 + (theta * theta).exp();
    ((tail_tol / allowance).ln() / q.ln()).ceil().max(1.0) as usize
}

/// Displaced thermal state `D(θ) ρ_N̄ D(θ)†` truncated to `d` Fock levels.
pub fn displaced_thermal(theta: f64, nbar: f64, d: usize) -> Result<DensityMatrix> {
    GaussianFockFamily::new(nbar, d)?.state(theta)
}

/// Displaced thermal family in a truncated Fock space.
#[derive(Debug, Clone)]
pub struct GaussianFockFamily {
    nbar: f64,
    d: usize,
    tail_tol: f64,
    half_line: bool,
    rho0: ComplexMatrix,
    // G = a† − a and the spectral decomposition of the Hermitian iG.
    generator: ComplexMatrix,
    generator_eig: SpectralDecomposition,
}

impl GaussianFockFamily {
    pub fn new(nbar: f64, d: usize) -> Result<Self> {
        Self::with_tail_tol(nbar, d, 1e-10)
    }

    pub fn with_tail_tol(nbar: f64, d: usize, tail_tol: f64) -> Result<Self> {
        if !(nbar > 0.0 && nbar.is_finite()) {
            return Err(Error::Domain(format!("mean photon number {nbar} must be positive")));
        }
        if d < 2 {
            return Err(Error::Validation("truncation dimension must be at least 2".into()));
        }
        if d > crate::config::tolerances().max_dim {
            return Err(Error::Capacity(format!("truncation dimension {d} exceeds the maximum")));
        }
        if !(tail_tol > 0.0) {
            return Err(Error::Validation("tail tolerance must be positive".into()));
        }
        let q = nbar / (nbar + 1.0);
        let diag: Vec<Complex> = (0..d).map(|k| cr(q.powi(k as i32) / (nbar + 1.0))).collect();
        let rho0 = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        let mut g = ComplexMatrix::zeros(d, d);
        for k in 0..d - 1 {
            let s = ((k + 1) as f64).sqrt();
            g[(k + 1, k)] = cr(s);
            g[(k, k + 1)] = cr(-s);
        }
        let h = HermitianOperator::from_hermitian_part(&g * c(0.0, 1.0));
        let generator_eig = eig_hermitian(&h);
        Ok(Self {
            nbar,
            d,
            tail_tol,
            half_line: false,
            rho0,
            generator: g,
            generator_eig,
        })
    }

    /// Same state map restricted to Θ = [0, ∞).
    pub fn half_line(mut self) -> Self {
        self.half_line = true;
        self
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    pub fn truncation(&self) -> usize {
        self.d
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    fn check_truncation(&self, theta: f64) -> Result<()> {
        let q = self.nbar / (self.nbar + 1.0);
        let tail = q.powi(self.d as i32) * (1.0 + (theta * theta).exp());
        if !(tail <= self.tail_tol) {
            return Err(Error::Capacity(format!(
                "truncation d = {} leaves tail mass {tail:e} above {:e} at theta = {theta}; use d >= {}",
                self.d,
                self.tail_tol,
                suggested_truncation(self.nbar, theta, self.tail_tol)
            )));
        }
        Ok(())
    }

    fn displacement(&self, theta: f64) -> ComplexMatrix {
        // exp(θ G) = exp(−i θ (iG)).
        let v = &self.generator_eig.eigenvectors;
        let mut scaled = v.clone();
        for (j, &l) in self.generator_eig.eigenvalues.iter().enumerate() {
            let phase = Complex::from_polar(1.0, -theta * l);
            for i in 0..self.d {
                scaled[(i, j)] *= phase;
            }
        }
        scaled * v.adjoint()
    }
}

impl StateFamily for GaussianFockFamily {
    fn dim(&self) -> usize {
        self.d
    }

    fn domain(&self) -> Domain {
        if self.half_line {
            Domain::half_line()
        } else {
            Domain::real_line()
        }
    }

    fn state(&self, theta: f64) -> Result<DensityMatrix> {
        self.domain().require(theta)?;
        self.check_truncation(theta)?;
        let u = self.displacement(theta);
        let m = &u * &self.rho0 * u.adjoint();
        let tol = crate::config::Tolerances {
            trace: self.tail_tol.max(1e-10),
            ..Default::default()
        };
        DensityMatrix::with_tolerances(m, &tol)
    }

    /// `[G, ρ_θ]`, exact on the truncation.
    fn derivative(&self, theta: f64) -> Result<HermitianOperator> {
        let rho = self.state(theta)?;
        let m = &self.generator * rho.matrix() - rho.matrix() * &self.generator;
        Ok(HermitianOperator::from_hermitian_part(m))
    }

    /// `U(θ) log ρ_N̄ U(θ)†` with the thermal log-spectrum written down directly.
    fn log_state(&self, theta: f64) -> Option<Result<HermitianOperator>> {
        let run = || -> Result<HermitianOperator> {
            self.domain().require(theta)?;
            self.check_truncation(theta)?;
            let q = self.nbar / (self.nbar + 1.0);
            let diag: Vec<Complex> = (0..self.d)
                .map(|k| cr(k as f64 * q.ln() - (self.nbar + 1.0).ln()))
                .collect();
            let l = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
            let u = self.displacement(theta);
            Ok(HermitianOperator::from_hermitian_part(&u * l * u.adjoint()))
        };
        Some(run())
    }

    fn closed_forms(&self) -> Option<ClosedFormTriple> {
        Some(gaussian_closed_forms(self.nbar))
    }

    fn gaussian_nbar(&self) -> Option<f64> {
        Some(self.nbar)
    }

    fn name(&self) -> String {
        format!(
            "gaussian(nbar={}, d={}{})",
            self.nbar,
            self.d,
            if self.half_line { ", half-line" } else { "" }
        )
    }
}

/// Diagonal states `diag(p_θ)` of a one-statistic exponential family.
#[derive(Debug, Clone)]
pub struct ClassicalDiagonalFamily {
    fam: ExponentialFamily,
}

impl ClassicalDiagonalFamily {
    pub fn new(fam: ExponentialFamily) -> Result<Self> {
        if fam.dim() != 1 {
            return Err(Error::Validation("diagonal family needs a one-parameter exponential family".into()));
        }
        Ok(Self { fam })
    }

    pub fn exponential_family(&self) -> &ExponentialFamily {
        &self.fam
    }

    /// Classical Fisher information `Var_θ(F)`.
    pub fn classical_fisher(&self, theta: f64) -> Result<f64> {
        Ok(self.fam.fisher_matrix(&[theta])?[(0, 0)])
    }
}

impl StateFamily for ClassicalDiagonalFamily {
    fn dim(&self) -> usize {
        self.fam.n_outcomes()
    }

    fn domain(&self) -> Domain {
        Domain::real_line()
    }

    fn state(&self, theta: f64) -> Result<DensityMatrix> {
        self.domain().require(theta)?;
        let p = self.fam.probabilities(&[theta])?;
        let diag: Vec<Complex> = p.into_iter().map(cr).collect();
        Ok(DensityMatrix::from_trusted(ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))))
    }

    fn derivative(&self, theta: f64) -> Result<HermitianOperator> {
        self.domain().require(theta)?;
        let p = self.fam.probabilities(&[theta])?;
        let (_, eta) = self.fam.potential_and_mean(&[theta])?;
        let dp: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(w, pw)| pw * (self.fam.statistic(w)[0] - eta[0]))
            .collect();
        Ok(HermitianOperator::from_real_diagonal(&dp))
    }

    fn name(&self) -> String {
        format!("diagonal(k={})", self.fam.n_outcomes())
    }
}

type StateFn = Arc<dyn Fn(f64) -> Result<DensityMatrix> + Send + Sync>;
type DerivFn = Arc<dyn Fn(f64) -> Result<HermitianOperator> + Send + Sync>;

/// Family given by closures, with an optional analytic derivative.
#[derive(Clone)]
pub struct CustomFamily {
    dim: usize,
    domain: Domain,
    state: StateFn,
    derivative: Option<DerivFn>,
    step: Option<f64>,
    name: String,
}

impl CustomFamily {
    pub fn new<F>(dim: usize, domain: Domain, state: F) -> Self
    where
        F: Fn(f64) -> Result<DensityMatrix> + Send + Sync + 'static,
    {
        Self {
            dim,
            domain,
            state: Arc::new(state),
            derivative: None,
            step: None,
            name: "custom".into(),
        }
    }

    pub fn with_derivative<G>(mut self, d: G) -> Self
    where
        G: Fn(f64) -> Result<HermitianOperator> + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(d));
        self
    }

    /// Fixed finite-difference step instead of the default.
    pub fn with_step(mut self, h: f64) -> Self {
        self.step = Some(h);
        self
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }
}

impl StateFamily for CustomFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn state(&self, theta: f64) -> Result<DensityMatrix> {
        self.domain.require(theta)?;
        let rho = (self.state)(theta)?;
        if rho.dim() != self.dim {
            return Err(Error::Validation(format!(
                "family produced a {}-dimensional state, expected {}",
                rho.dim(),
                self.dim
            )));
        }
        Ok(rho)
    }

    fn derivative(&self, theta: f64) -> Result<HermitianOperator> {
        match &self.derivative {
            Some(d) => {
                self.domain.require(theta)?;
                d(theta)
            }
            None => finite_difference(self, theta, self.step.unwrap_or_else(|| default_step(theta))),
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}
