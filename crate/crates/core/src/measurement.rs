//! Finite POVMs and PVMs, outcome statistics, pinching and the classical
//! quantities a measurement induces on a state family.

use serde_json::{json, Value};

use crate::config::tolerances;
use crate::error::{Error, Result};
use crate::expfam::kl_discrete;
use crate::families::StateFamily;
use crate::linalg::{
    c, check_same_dim, cr, eig_hermitian, eig_matrix, max_abs, trace_product_re, ComplexMatrix, DensityMatrix,
    HermitianOperator,
};

/// Positive operator-valued measure with real outcome labels.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianOperator>,
    values: Vec<f64>,
}

impl Povm {
    /// Validates positivity of every element and completeness.
    pub fn new(elements: Vec<HermitianOperator>, values: Vec<f64>) -> Result<Self> {
        let povm = Self::unchecked(elements, values)?;
        let tol = tolerances();
        for (i, e) in povm.elements.iter().enumerate() {
            let min = eig_hermitian(e).min_eigenvalue();
            if min < -tol.psd {
                return Err(Error::Validation(format!(
                    "POVM element {i} is not positive semidefinite (min eigenvalue {min:e})"
                )));
            }
        }
        let res = povm.completeness_residual();
        if res > tol.completeness {
            return Err(Error::Validation(format!("POVM elements do not sum to identity (residual {res:e})")));
        }
        Ok(povm)
    }

    /// Shape checks only; for constructions complete by design.
    pub(crate) fn unchecked(elements: Vec<HermitianOperator>, values: Vec<f64>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Validation("POVM needs at least one element".into()));
        }
        if elements.len() != values.len() {
            return Err(Error::Validation(format!(
                "POVM has {} elements but {} values",
                elements.len(),
                values.len()
            )));
        }
        let dim = elements[0].dim();
        if elements.iter().any(|e| e.dim() != dim) {
            return Err(Error::Validation("POVM elements have different dimensions".into()));
        }
        Ok(Self { dim, elements, values })
    }

    /// The trivial measurement `{I}` with a single label.
    pub fn trivial(dim: usize, value: f64) -> Self {
        Self {
            dim,
            elements: vec![HermitianOperator::identity(dim)],
            values: vec![value],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same elements, new labels.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::unchecked(self.elements.clone(), values)
    }

    /// `‖Σ M_i − I‖_max`.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
        for e in &self.elements {
            sum += e.matrix();
        }
        max_abs(&(sum - ComplexMatrix::identity(self.dim, self.dim)))
    }

    /// Product measurement on the tensor product, outcomes ordered with the
    /// first factor most significant. Labels are the index of the outcome.
    pub fn tensor(&self, other: &Povm) -> Result<Povm> {
        let dim = self.dim * other.dim;
        if dim > tolerances().max_dim {
            return Err(Error::Capacity(format!("product POVM dimension {dim} exceeds the maximum")));
        }
        let mut elements = Vec::with_capacity(self.len() * other.len());
        for a in &self.elements {
            for b in &other.elements {
                elements.push(HermitianOperator::from_hermitian_part(crate::linalg::kron(a.matrix(), b.matrix())));
            }
        }
        let values = (0..elements.len()).map(|i| i as f64).collect();
        Povm::unchecked(elements, values)
    }

    /// JSON form `{dim, values, elements}` with each element row-major and
    /// interleaved `re, im`.
    pub fn to_json(&self) -> Value {
        let elements: Vec<Vec<f64>> = self
            .elements
            .iter()
            .map(|e| {
                let m = e.matrix();
                let mut v = Vec::with_capacity(2 * self.dim * self.dim);
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        v.push(m[(i, j)].re);
                        v.push(m[(i, j)].im);
                    }
                }
                v
            })
            .collect();
        json!({ "dim": self.dim, "values": self.values, "elements": elements })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Validation(format!("invalid POVM JSON: {m}"));
        let dim = v["dim"].as_u64().ok_or_else(|| bad("missing dim"))? as usize;
        let values: Vec<f64> = v["values"]
            .as_array()
            .ok_or_else(|| bad("missing values"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| bad("non-numeric value")))
            .collect::<Result<_>>()?;
        let mut elements = Vec::new();
        for e in v["elements"].as_array().ok_or_else(|| bad("missing elements"))? {
            let flat: Vec<f64> = e
                .as_array()
                .ok_or_else(|| bad("element is not an array"))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad("non-numeric entry")))
                .collect::<Result<_>>()?;
            if flat.len() != 2 * dim * dim {
                return Err(bad("element has the wrong number of entries"));
            }
            let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
                let k = 2 * (i * dim + j);
                c(flat[k], flat[k + 1])
            });
            elements.push(HermitianOperator::new(m)?);
        }
        Povm::new(elements, values)
    }
}

/// Projection-valued measure.
#[derive(Debug, Clone)]
pub struct Pvm {
    povm: Povm,
}

impl Pvm {
    /// Validates the POVM conditions and orthogonality `E_i E_j = δ_ij E_i`.
    pub fn new(elements: Vec<HermitianOperator>, values: Vec<f64>) -> Result<Self> {
        let povm = Povm::new(elements, values)?;
        for (i, a) in povm.elements.iter().enumerate() {
            for (j, b) in povm.elements.iter().enumerate() {
                let prod = a.matrix() * b.matrix();
                let target = if i == j { a.matrix().clone() } else { ComplexMatrix::zeros(povm.dim, povm.dim) };
                if max_abs(&(prod - target)) > 1e-9 {
                    return Err(Error::Validation(format!("elements {i} and {j} are not orthogonal projectors")));
                }
            }
        }
        Ok(Self { povm })
    }

    pub(crate) fn from_projectors(elements: Vec<HermitianOperator>, values: Vec<f64>) -> Self {
        Self {
            povm: Povm::unchecked(elements, values).expect("consistent projector list"),
        }
    }

    pub fn as_povm(&self) -> &Povm {
        &self.povm
    }

    pub fn into_povm(self) -> Povm {
        self.povm
    }

    pub fn len(&self) -> usize {
        self.povm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povm.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.povm.dim
    }

    /// Largest projector rank, `w(E)`.
    pub fn max_rank(&self) -> usize {
        self.povm
            .elements
            .iter()
            .map(|e| e.trace().round() as usize)
            .max()
            .unwrap_or(0)
    }
}

/// Outcome probabilities with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub probabilities: Vec<f64>,
    pub values: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn mean(&self) -> f64 {
        self.probabilities.iter().zip(&self.values).map(|(p, x)| p * x).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probabilities.iter().zip(&self.values).map(|(p, x)| p * (x - m).powi(2)).sum()
    }
}

/// Spectral measure of `X`; eigenvalues within the merge tolerance share one
/// projector, labelled by their mean.
pub fn spectral_pvm(x: &HermitianOperator) -> Pvm {
    let tol = tolerances();
    let spec = eig_hermitian(x);
    let d = x.dim();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        match groups.last_mut() {
            Some(g) if (spec.eigenvalues[i] - spec.eigenvalues[g[0]]).abs() <= tol.eigen_merge => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut elements = Vec::with_capacity(groups.len());
    let mut values = Vec::with_capacity(groups.len());
    for g in groups {
        let mut p = ComplexMatrix::zeros(d, d);
        for &i in &g {
            let v = spec.eigenvectors.column(i);
            p += v * v.adjoint();
        }
        elements.push(HermitianOperator::from_hermitian_part(p));
        values.push(g.iter().map(|&i| spec.eigenvalues[i]).sum::<f64>() / g.len() as f64);
    }
    Pvm::from_projectors(elements, values)
}

/// `p_i = Tr ρ M_i`. Negative values within the PSD tolerance are clamped to
/// zero and the vector is renormalized when its sum is within 1e−9 of one.
pub fn distribution(m: &Povm, rho: &DensityMatrix) -> Result<OutcomeDistribution> {
    check_same_dim(m.dim, rho.dim())?;
    let tol = tolerances();
    let mut probs = Vec::with_capacity(m.len());
    for (i, e) in m.elements.iter().enumerate() {
        let p = trace_product_re(rho.matrix(), e.matrix());
        if p < -tol.psd {
            return Err(Error::Validation(format!("outcome {i} has negative probability {p:e}")));
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol.completeness {
        return Err(Error::Validation(format!("outcome probabilities sum to {total}")));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(OutcomeDistribution {
        probabilities: probs,
        values: m.values.clone(),
    })
}

/// `(|Σ x_i Tr(∂ρ M_i) − 1|, |Σ x_i Tr(ρ M_i) − θ0|)`.
pub fn local_unbiasedness_residuals<F: StateFamily + ?Sized>(m: &Povm, family: &F, theta0: f64) -> Result<(f64, f64)> {
    let rho = family.state(theta0)?;
    let b = family.derivative(theta0)?;
    check_same_dim(m.dim, rho.dim())?;
    let mut slope = 0.0;
    let mut mean = 0.0;
    for (e, &x) in m.elements.iter().zip(&m.values) {
        slope += x * trace_product_re(b.matrix(), e.matrix());
        mean += x * trace_product_re(rho.matrix(), e.matrix());
    }
    Ok(((slope - 1.0).abs(), (mean - theta0).abs()))
}

/// Pinching `Σ_i E_i ρ E_i`.
pub fn pinching(e: &Pvm, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_same_dim(e.dim(), rho.dim())?;
    let d = rho.dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for p in e.povm.elements() {
        out += p.matrix() * rho.matrix() * p.matrix();
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// `λ M1 ⊕ (1 − λ) M2` on disjoint outcome sets.
pub fn disjoint_random_combination(m1: &Povm, m2: &Povm, lambda: f64) -> Result<Povm> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Validation(format!("mixing weight {lambda} must lie in (0, 1)")));
    }
    check_same_dim(m1.dim, m2.dim)?;
    let mut elements: Vec<HermitianOperator> = m1.elements.iter().map(|e| e.scale(lambda)).collect();
    elements.extend(m2.elements.iter().map(|e| e.scale(1.0 - lambda)));
    let mut values = m1.values.clone();
    values.extend_from_slice(&m2.values);
    Povm::unchecked(elements, values)
}

/// Generalized Gell-Mann basis of traceless Hermitian `k × k` matrices.
pub fn gell_mann_basis(k: usize) -> Vec<HermitianOperator> {
    let mut out = Vec::with_capacity(k * k - 1);
    for j in 0..k {
        for l in j + 1..k {
            let mut s = ComplexMatrix::zeros(k, k);
            s[(j, l)] = cr(1.0);
            s[(l, j)] = cr(1.0);
            out.push(HermitianOperator::from_hermitian_part(s));
            let mut a = ComplexMatrix::zeros(k, k);
            a[(j, l)] = c(0.0, -1.0);
            a[(l, j)] = c(0.0, 1.0);
            out.push(HermitianOperator::from_hermitian_part(a));
        }
    }
    for l in 1..k {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; k];
        for d in diag.iter_mut().take(l) {
            *d = norm;
        }
        diag[l] = -(l as f64) * norm;
        out.push(HermitianOperator::from_real_diagonal(&diag));
    }
    out
}

/// Uniform disjoint combination of the spectral measures of the Gell-Mann
/// basis. Outcome labels are the outcome indices.
pub fn faithful_povm(k: usize) -> Result<Povm> {
    if k < 2 {
        return Err(Error::Validation("faithful POVM needs dimension at least 2".into()));
    }
    let basis = gell_mann_basis(k);
    let w = 1.0 / basis.len() as f64;
    let mut elements = Vec::new();
    for b in &basis {
        for p in spectral_pvm(b).into_povm().elements {
            elements.push(p.scale(w));
        }
    }
    let values = (0..elements.len()).map(|i| i as f64).collect();
    Povm::unchecked(elements, values)
}

/// Classical Fisher information, KL divergence and Hellinger affinity of the
/// outcome distributions a measurement induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InducedQuantities {
    pub fisher: f64,
    /// `D(P_θ‖P_θ′)`
    pub kl: f64,
    /// `−8 log Σ √(p q)`
    pub hellinger_affinity: f64,
}

/// Classical Fisher information `Σ (∂p)²/p` of an outcome distribution.
pub fn classical_fisher(p: &[f64], dp: &[f64]) -> f64 {
    let mut f = 0.0;
    for (&pi, &di) in p.iter().zip(dp) {
        if pi > 0.0 {
            f += di * di / pi;
        } else if di.abs() > 1e-12 {
            return f64::INFINITY;
        }
    }
    f
}

/// `−8 log Σ √(p q)`.
pub fn hellinger_affinity(p: &[f64], q: &[f64]) -> f64 {
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).max(0.0).sqrt()).sum();
    if bc <= 0.0 {
        f64::INFINITY
    } else {
        -8.0 * bc.min(1.0).ln()
    }
}

pub fn induced_classical_quantities<F: StateFamily + ?Sized>(
    m: &Povm,
    family: &F,
    theta: f64,
    theta_prime: f64,
) -> Result<InducedQuantities> {
    let p = distribution(m, &family.state(theta)?)?.probabilities;
    let q = distribution(m, &family.state(theta_prime)?)?.probabilities;
    let b = family.derivative(theta)?;
    let dp: Vec<f64> = m.elements.iter().map(|e| trace_product_re(b.matrix(), e.matrix())).collect();
    Ok(InducedQuantities {
        fisher: classical_fisher(&p, &dp),
        kl: kl_discrete(&p, &q),
        hellinger_affinity: hellinger_affinity(&p, &q),
    })
}

/// KL divergence of the product distribution of per-copy measurements,
/// computed as the sum of the per-copy divergences.
pub fn separable_kl_decomposition<F: StateFamily + ?Sized>(
    per_copy: &[Povm],
    theta: f64,
    theta_prime: f64,
    family: &F,
) -> Result<f64> {
    let rho = family.state(theta)?;
    let sigma = family.state(theta_prime)?;
    let mut total = 0.0;
    for m in per_copy {
        let p = distribution(m, &rho)?.probabilities;
        let q = distribution(m, &sigma)?.probabilities;
        total += kl_discrete(&p, &q);
    }
    Ok(total)
}

/// Projectors onto the eigenspaces of ρ, as a PVM (used to test that
/// pinching by ρ's own eigenbasis is the identity).
pub fn eigenbasis_pvm(rho: &DensityMatrix) -> Pvm {
    let spec = eig_matrix(rho.matrix());
    let d = rho.dim();
    let elements = (0..d)
        .map(|i| {
            let v = spec.eigenvectors.column(i);
            HermitianOperator::from_hermitian_part(v * v.adjoint())
        })
        .collect();
    Pvm::from_projectors(elements, spec.eigenvalues.clone())
}
