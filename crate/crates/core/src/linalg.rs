//! Dense complex Hermitian linear algebra at small dimension.
//!
//! Everything here is built on `nalgebra::DMatrix<Complex64>`. The two
//! newtypes [`HermitianOperator`] and [`DensityMatrix`] carry their
//! invariants: constructing one validates the input, and every value that
//! exists is safe to feed into the spectral calculus.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::config::{tolerances, Tolerances};
use crate::error::{Error, Result};

pub type Complex = Complex64;
pub type ComplexMatrix = DMatrix<Complex>;
pub type ComplexVector = DVector<Complex>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max_ij |A_ij - conj(A_ji)|`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn trace(m: &ComplexMatrix) -> Complex {
    m.diagonal().iter().sum()
}

/// Real part of `Tr(a b)` without forming the product.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * cr(0.5)
}

/// Hermitian operator with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(m, &tolerances())
    }

    /// Validates squareness, finiteness and Hermiticity, then removes the
    /// anti-Hermitian residue exactly.
    pub fn with_tolerances(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Validation(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("operator has non-finite entries".into()));
        }
        let dev = hermitian_deviation(&m);
        let bound = tol.hermitian * (1.0 + max_abs(&m));
        if dev > bound {
            return Err(Error::Validation(format!(
                "operator is not Hermitian: deviation {dev:e} exceeds {bound:e}"
            )));
        }
        Ok(Self { m: hermitize(&m) })
    }

    /// Hermitian part of a matrix that is Hermitian up to rounding by
    /// construction (products like `U D U†`).
    pub(crate) fn from_hermitian_part(m: ComplexMatrix) -> Self {
        Self { m: hermitize(&m) }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| if i == j { cr(values[i]) } else { cr(0.0) });
        Self { m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: ComplexMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: ComplexMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        trace(&self.m).re
    }

    /// `Tr(rho A)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        trace_product_re(rho.matrix(), &self.m)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * cr(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { m: &self.m - &other.m }
    }

    /// `A + s I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += cr(s);
        }
        Self { m }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.m)
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(m, &tolerances())
    }

    pub fn with_tolerances(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let op = HermitianOperator::with_tolerances(m, tol)?;
        Self::from_operator_with(op, tol)
    }

    pub fn from_operator(op: HermitianOperator) -> Result<Self> {
        Self::from_operator_with(op, &tolerances())
    }

    fn from_operator_with(op: HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::Validation(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = eig_hermitian(&op).min_eigenvalue();
        if min < -tol.psd {
            return Err(Error::Validation(format!(
                "density matrix is not positive semidefinite: min eigenvalue {min:e}"
            )));
        }
        Ok(Self { op })
    }

    /// Skips the eigenvalue check; for states positive by construction
    /// (tensor products, pinchings, conjugations of valid states).
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self { op: HermitianOperator::from_hermitian_part(m) }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < -tolerances().psd) {
            return Err(Error::Validation("diagonal state has negative or non-finite weight".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tolerances().trace {
            return Err(Error::Validation(format!("diagonal state weights sum to {total}")));
        }
        Ok(Self { op: HermitianOperator::from_real_diagonal(probs) })
    }

    /// `|psi><psi|` for a (normalized on entry) vector.
    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Validation("pure state vector has zero or non-finite norm".into()));
        }
        let v = psi / cr(norm);
        Ok(Self::from_trusted(&v * v.adjoint()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim).scale(1.0 / dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.op
    }

    /// `U rho U†` for a unitary `U`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Self {
        Self::from_trusted(u * self.matrix() * u.adjoint())
    }
}

impl AsRef<HermitianOperator> for DensityMatrix {
    fn as_ref(&self) -> &HermitianOperator {
        &self.op
    }
}

impl AsRef<HermitianOperator> for HermitianOperator {
    fn as_ref(&self) -> &HermitianOperator {
        self
    }
}

/// How spectral functions treat zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPolicy {
    /// Every eigenvalue is fed to `f`; a non-finite value is an error.
    Error,
    /// `f` is taken to be zero on the kernel (support-restricted calculus).
    SkipZero,
}

/// Eigenvalues ascending, eigenvectors as the columns of a unitary.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Eigenvalues after clamping `[-clamp, 0)` to zero.
    pub fn clamped_eigenvalues(&self) -> Vec<f64> {
        let clamp = tolerances().clamp;
        self.eigenvalues
            .iter()
            .map(|&l| if l < 0.0 && l >= -clamp { 0.0 } else { l })
            .collect()
    }

    pub fn eigenvector(&self, i: usize) -> ComplexVector {
        self.eigenvectors.column(i).into_owned()
    }

    /// `U diag(values) U†`.
    pub fn synthesize(&self, values: &[f64]) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        scaled * u.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.synthesize(&self.eigenvalues)
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        max_abs(&(self.eigenvectors.adjoint() * &self.eigenvectors - ComplexMatrix::identity(n, n)))
    }

    /// Applies a scalar function on the spectrum, honouring clamping and the
    /// kernel policy.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, policy: KernelPolicy) -> Result<HermitianOperator> {
        let values = self.function_values(f, policy)?;
        Ok(HermitianOperator::from_hermitian_part(self.synthesize(&values)))
    }

    pub(crate) fn function_values<F: Fn(f64) -> f64>(
        &self,
        f: F,
        policy: KernelPolicy,
    ) -> Result<Vec<f64>> {
        self.clamped_eigenvalues()
            .into_iter()
            .map(|l| {
                if policy == KernelPolicy::SkipZero && l == 0.0 {
                    return Ok(0.0);
                }
                let v = f(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Domain(format!("function is not finite at eigenvalue {l:e}")))
                }
            })
            .collect()
    }

    /// Matrix elements of `A` in this eigenbasis: `U† A U`.
    pub fn to_eigenbasis(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.eigenvectors.adjoint() * a * &self.eigenvectors
    }

    /// Inverse of [`to_eigenbasis`](Self::to_eigenbasis).
    pub fn from_eigenbasis(&self, a: &ComplexMatrix) -> ComplexMatrix {
        &self.eigenvectors * a * self.eigenvectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian operator.
pub fn eig_hermitian<A: AsRef<HermitianOperator>>(a: A) -> SpectralDecomposition {
    eig_matrix(a.as_ref().matrix())
}

/// Eigendecomposition of a raw matrix that is Hermitian by construction.
pub(crate) fn eig_matrix(m: &ComplexMatrix) -> SpectralDecomposition {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SpectralDecomposition { eigenvalues, eigenvectors }
}

/// Validating wrapper: `A` is checked against the Hermitian invariant first.
pub fn eig_checked(m: &ComplexMatrix) -> Result<SpectralDecomposition> {
    let op = HermitianOperator::new(m.clone())?;
    Ok(eig_hermitian(&op))
}

/// `U f(Λ) U†`.
pub fn spectral_apply<A, F>(a: A, f: F, policy: KernelPolicy) -> Result<HermitianOperator>
where
    A: AsRef<HermitianOperator>,
    F: Fn(f64) -> f64,
{
    eig_hermitian(a).apply(f, policy)
}

/// `Tr|√ρ √σ|`, the sum of singular values of `√ρ √σ`.
///
/// Singular values are used rather than `Tr √(√ρ σ √ρ)` because taking square
/// roots of nearly-zero eigenvalues amplifies rounding on rank-deficient
/// inputs.
pub fn trace_norm_product(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let sqrt_rho = spectral_apply(rho, f64::sqrt, KernelPolicy::SkipZero)?;
    let sqrt_sigma = spectral_apply(sigma, f64::sqrt, KernelPolicy::SkipZero)?;
    let prod = sqrt_rho.matrix() * sqrt_sigma.matrix();
    let sv = prod.singular_values();
    Ok(sv.iter().sum())
}

pub(crate) fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Validation(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// `ρ ⊗ ρ'`.
pub fn tensor_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    let dim = a.dim() * b.dim();
    if dim > tolerances().max_dim {
        return Err(Error::Capacity(format!(
            "tensor product dimension {dim} exceeds maximum {}",
            tolerances().max_dim
        )));
    }
    Ok(DensityMatrix::from_trusted(kron(a.matrix(), b.matrix())))
}

/// `ρ^{⊗n}`.
pub fn tensor_power(rho: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    tensor_power_with(rho, n, tolerances().max_dim)
}

pub fn tensor_power_with(rho: &DensityMatrix, n: usize, max_dim: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::Validation("tensor power requires n >= 1".into()));
    }
    let dim = (rho.dim() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > max_dim as u128 {
        return Err(Error::Capacity(format!(
            "dimension {}^{n} exceeds maximum {max_dim}",
            rho.dim()
        )));
    }
    let mut acc = rho.matrix().clone();
    for _ in 1..n {
        acc = kron(&acc, rho.matrix());
    }
    Ok(DensityMatrix::from_trusted(acc))
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn unitary_exp(h: &HermitianOperator, t: f64) -> ComplexMatrix {
    let eig = eig_hermitian(h);
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex::from_polar(1.0, -t * l);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= phase;
        }
    }
    scaled * u.adjoint()
}

/// Random matrices for test suites and randomized checks.
pub mod random {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }

    pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| c(gaussian(rng), gaussian(rng)))
    }

    pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
        let g = ginibre(dim, dim, rng);
        HermitianOperator::from_hermitian_part(&g + g.adjoint())
    }

    /// Traceless Hermitian operator.
    pub fn traceless_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
        let h = hermitian(dim, rng);
        let t = h.trace() / dim as f64;
        h.shift(-t)
    }

    /// Full-rank mixed state from the Hilbert-Schmidt ensemble.
    pub fn density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
        let g = ginibre(dim, dim, rng);
        let w = &g * g.adjoint();
        let t = trace(&w).re;
        DensityMatrix::from_trusted(w / cr(t))
    }

    /// Mixed state of the given rank.
    pub fn density_of_rank<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
        let g = ginibre(dim, rank.max(1), rng);
        let w = &g * g.adjoint();
        let t = trace(&w).re;
        DensityMatrix::from_trusted(w / cr(t))
    }

    pub fn pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
        density_of_rank(dim, 1, rng)
    }

    /// Haar-random unitary via QR of a Ginibre matrix.
    pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
        let g = ginibre(dim, dim, rng);
        let qr = g.qr();
        let q = qr.q();
        let r = qr.r();
        let mut out = q.clone();
        for j in 0..dim {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 { d / cr(d.norm()) } else { cr(1.0) };
            for i in 0..dim {
                out[(i, j)] *= phase;
            }
        }
        out
    }

    /// Random POVM with `outcomes` full-rank elements: `S^{-1/2} G_i S^{-1/2}`.
    pub fn povm_elements<R: Rng + ?Sized>(
        dim: usize,
        outcomes: usize,
        rng: &mut R,
    ) -> Vec<HermitianOperator> {
        let raw: Vec<ComplexMatrix> = (0..outcomes)
            .map(|_| {
                let g = ginibre(dim, dim, rng);
                &g * g.adjoint()
            })
            .collect();
        let total = raw.iter().fold(ComplexMatrix::zeros(dim, dim), |acc, m| acc + m);
        let inv_sqrt = eig_matrix(&hermitize(&total))
            .apply(|x| 1.0 / x.sqrt(), KernelPolicy::Error)
            .expect("sum of Wishart matrices is positive definite");
        raw.iter()
            .map(|m| {
                HermitianOperator::from_hermitian_part(inv_sqrt.matrix() * m * inv_sqrt.matrix())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::new(ComplexMatrix::from_row_slice(
            2,
            2,
            &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)],
        ))
        .unwrap()
    }

    #[test]
    fn diagonal_spectrum() {
        let eig = eig_hermitian(&HermitianOperator::from_real_diagonal(&[2.0, 1.0]));
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_x_spectrum() {
        let eig = eig_hermitian(&pauli_x());
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.5), cr(0.0)]);
        assert!(matches!(eig_checked(&m), Err(Error::Validation(_))));
        let bad = ComplexMatrix::from_row_slice(2, 2, &[cr(f64::NAN), cr(0.0), cr(0.0), cr(1.0)]);
        assert!(HermitianOperator::new(bad).is_err());
    }

    #[test]
    fn random_reconstruction_8x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = random::hermitian(8, &mut rng);
            let eig = eig_hermitian(&a);
            let scale = 1.0 + a.max_abs();
            assert!(max_abs(&(eig.reconstruct() - a.matrix())) <= 1e-11 * scale);
            assert!(eig.unitarity_residual() <= 1e-11);
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn identity_function_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random::hermitian(5, &mut rng);
        let b = spectral_apply(&a, |x| x, KernelPolicy::Error).unwrap();
        assert!(max_abs(&(b.matrix() - a.matrix())) <= 1e-12 * (1.0 + a.max_abs()));
    }

    #[test]
    fn log_and_power_on_diagonal() {
        let a = HermitianOperator::from_real_diagonal(&[1.0, std::f64::consts::E]);
        let l = spectral_apply(&a, f64::ln, KernelPolicy::Error).unwrap();
        assert!(l.matrix()[(0, 0)].re.abs() < 1e-14);
        assert!((l.matrix()[(1, 1)].re - 1.0).abs() < 1e-14);

        let t = HermitianOperator::from_real_diagonal(&[0.75, 0.25]);
        let p = spectral_apply(&t, |x| x.powf(0.3), KernelPolicy::Error).unwrap();
        assert!((p.matrix()[(0, 0)].re - 0.75_f64.powf(0.3)).abs() < 1e-14);
        assert!((p.matrix()[(1, 1)].re - 0.25_f64.powf(0.3)).abs() < 1e-14);
    }

    #[test]
    fn log_of_zero_depends_on_policy() {
        let a = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        match spectral_apply(&a, f64::ln, KernelPolicy::Error) {
            Err(Error::Domain(msg)) => assert!(msg.contains("0e0")),
            other => panic!("expected domain error, got {other:?}"),
        }
        let l = spectral_apply(&a, f64::ln, KernelPolicy::SkipZero).unwrap();
        assert!(l.max_abs() < 1e-15);
    }

    #[test]
    fn tiny_negative_eigenvalues_are_clamped() {
        let a = HermitianOperator::from_real_diagonal(&[-5e-13, 1.0]);
        let s = spectral_apply(&a, f64::sqrt, KernelPolicy::Error).unwrap();
        assert_eq!(s.matrix()[(0, 0)].re, 0.0);
        let b = HermitianOperator::from_real_diagonal(&[-1e-9, 1.0]);
        assert!(spectral_apply(&b, f64::sqrt, KernelPolicy::Error).is_err());
    }

    #[test]
    fn trace_norm_product_cases() {
        let up = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let down = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        assert!((trace_norm_product(&up, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!(trace_norm_product(&up, &down).unwrap().abs() < 1e-12);
        let a = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let b = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let f = trace_norm_product(&a, &b).unwrap();
        assert!((f - 2.0 * 0.21_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tensor_power_dims_and_capacity() {
        let rho = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        assert_eq!(tensor_power(&rho, 1).unwrap(), rho);
        let r3 = tensor_power(&rho, 3).unwrap();
        assert_eq!(r3.dim(), 8);
        assert!((r3.as_operator().trace() - 1.0).abs() < 1e-9);
        assert!(matches!(tensor_power(&rho, 13), Err(Error::Capacity(_))));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.6]).is_err());
        let m = ComplexMatrix::from_row_slice(2, 2, &[cr(1.2), cr(0.0), cr(0.0), cr(-0.2)]);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn unitary_exp_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random::hermitian(6, &mut rng);
        let u = unitary_exp(&h, 0.7);
        let id = ComplexMatrix::identity(6, 6);
        assert!(max_abs(&(u.adjoint() * &u - id)) < 1e-12);
    }
}
