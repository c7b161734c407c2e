//! Schur–Weyl machinery for `n` qubits.
//!
//! The irreducible decomposition is built by coupling qubits left to right
//! with Clebsch–Gordan coefficients. Each coupling path gives one irreducible
//! block of total spin `j`, stored as a sparse orthonormal basis
//! `|path; j, m⟩` with `m = j, j−1, …, −j`. Qubit `|0⟩` is spin up, and the
//! last qubit is the least significant bit of the computational index.
//!
//! Because every block carries the same irrep in the same standard basis, the
//! restriction `B†σ^{⊗n}B` depends only on `j`. It is computed once per `j`
//! from a representative block, which keeps refined-PVM probabilities cheap
//! far beyond the sizes where dense `2^n × 2^n` projectors are practical.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;

use crate::config::tolerances;
use crate::error::{Error, Result};
use crate::expfam::kl_discrete;
use crate::families::StateFamily;
use crate::linalg::{
    c, cr, eig_hermitian, eig_matrix, max_abs, Complex, ComplexMatrix, ComplexVector, DensityMatrix,
    HermitianOperator,
};
use crate::measurement::{distribution, faithful_povm, pinching, Povm, Pvm};
use crate::qmetrics::relative_entropy;
use crate::stats::{categorical, golden_section_max};

/// Largest number of qubits for the irrep decomposition.
pub const MAX_QUBITS: usize = 12;
/// Largest `n` for which dense projectors are materialized.
pub const MAX_DENSE_QUBITS: usize = 6;

type SparseVec = Vec<(u32, f64)>;

/// One irreducible block of the coupling tree.
#[derive(Debug, Clone)]
pub struct IrrepBlock {
    /// Twice the total spin.
    pub two_j: usize,
    /// Twice the intermediate spin after each qubit is coupled.
    pub path: Vec<usize>,
    basis: Vec<SparseVec>,
}

impl IrrepBlock {
    pub fn dim(&self) -> usize {
        self.two_j + 1
    }

    /// Basis vector `|j, m⟩` with `m = j − i`, densely.
    pub fn basis_vector(&self, i: usize, n: usize) -> ComplexVector {
        scatter(&self.basis[i], 1 << n)
    }
}

/// Decomposition of `(C²)^{⊗n}` into irreducible blocks.
#[derive(Debug)]
pub struct IrrepPvm {
    n: usize,
    blocks: Vec<IrrepBlock>,
    representative: BTreeMap<usize, usize>,
}

fn scatter(v: &SparseVec, len: usize) -> ComplexVector {
    let mut out = ComplexVector::zeros(len);
    for &(i, x) in v {
        out[i as usize] = cr(x);
    }
    out
}

fn build(n: usize) -> IrrepPvm {
    // Each entry: (path, basis ordered from m = j downwards).
    let mut level: Vec<(Vec<usize>, Vec<SparseVec>)> = vec![(vec![1], vec![vec![(0, 1.0)], vec![(1, 1.0)]])];
    for _ in 1..n {
        let mut next = Vec::with_capacity(level.len() * 2);
        for (path, vecs) in &level {
            let a = *path.last().unwrap();
            let mut targets = vec![a + 1];
            if a >= 1 {
                targets.push(a - 1);
            }
            for &ap in &targets {
                let raising = ap == a + 1;
                let mut basis = Vec::with_capacity(ap + 1);
                for ip in 0..=ap {
                    let tm = ap as i64 - 2 * ip as i64;
                    let ai = a as i64;
                    let denom = 2.0 * (a as f64 + 1.0);
                    let (cu, cd) = if raising {
                        (
                            ((ai + tm + 1) as f64 / denom).sqrt(),
                            ((ai - tm + 1) as f64 / denom).sqrt(),
                        )
                    } else {
                        (
                            -((ai - tm + 1) as f64 / denom).sqrt(),
                            ((ai + tm + 1) as f64 / denom).sqrt(),
                        )
                    };
                    let mut entries: SparseVec = Vec::new();
                    // Up component from old m = tm − 1, down component from old m = tm + 1.
                    for (old_tm, coef, bit) in [(tm - 1, cu, 0u32), (tm + 1, cd, 1u32)] {
                        if old_tm.abs() > ai || coef == 0.0 {
                            continue;
                        }
                        let idx = ((ai - old_tm) / 2) as usize;
                        for &(k, x) in &vecs[idx] {
                            entries.push((2 * k + bit, coef * x));
                        }
                    }
                    entries.sort_by_key(|e| e.0);
                    basis.push(entries);
                }
                let mut p = path.clone();
                p.push(ap);
                next.push((p, basis));
            }
        }
        level = next;
    }
    let blocks: Vec<IrrepBlock> = level
        .into_iter()
        .map(|(path, basis)| IrrepBlock {
            two_j: *path.last().unwrap(),
            path,
            basis,
        })
        .collect();
    let mut representative = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        representative.entry(b.two_j).or_insert(i);
    }
    IrrepPvm {
        n,
        blocks,
        representative,
    }
}

fn cache() -> &'static RwLock<HashMap<usize, Arc<IrrepPvm>>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<IrrepPvm>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Irreducible decomposition of `n` qubits (cached per `n`).
pub fn qubit_irrep_pvm(n: usize) -> Result<Arc<IrrepPvm>> {
    if !(1..=MAX_QUBITS).contains(&n) {
        return Err(Error::Capacity(format!(
            "irrep decomposition supports 1 to {MAX_QUBITS} qubits, got {n}"
        )));
    }
    if let Some(e) = cache().read().expect("cache lock").get(&n) {
        return Ok(Arc::clone(e));
    }
    let built = Arc::new(build(n));
    let mut w = cache().write().expect("cache lock");
    Ok(Arc::clone(w.entry(n).or_insert(built)))
}

/// `σ^{⊗n} v` for a qubit operator `σ` and a dense vector of length `2^n`.
fn apply_tensor_power(s: &ComplexMatrix, n: usize, v: &mut ComplexVector) {
    let (s00, s01, s10, s11) = (s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
    for q in 0..n {
        let bit = 1usize << q;
        for i in 0..(1usize << n) {
            if i & bit == 0 {
                let (x0, x1) = (v[i], v[i | bit]);
                v[i] = s00 * x0 + s01 * x1;
                v[i | bit] = s10 * x0 + s11 * x1;
            }
        }
    }
}

fn sparse_dot(b: &SparseVec, v: &ComplexVector) -> Complex {
    b.iter().map(|&(i, x)| v[i as usize] * x).sum()
}

impl IrrepPvm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[IrrepBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(IrrepBlock::dim).collect()
    }

    /// `w(E)`, the largest block dimension.
    pub fn max_dim(&self) -> usize {
        self.blocks.iter().map(IrrepBlock::dim).max().unwrap_or(0)
    }

    /// Distinct values of `2j`, ascending.
    pub fn two_j_values(&self) -> Vec<usize> {
        self.representative.keys().copied().collect()
    }

    /// Number of blocks with total spin `two_j / 2`.
    pub fn multiplicity(&self, two_j: usize) -> usize {
        self.blocks.iter().filter(|b| b.two_j == two_j).count()
    }

    /// `B†σ^{⊗n}B` for a block `B` of the given index.
    pub fn restricted_block(&self, s: &ComplexMatrix, block: usize) -> ComplexMatrix {
        let b = &self.blocks[block];
        let d = b.dim();
        let len = 1usize << self.n;
        let mut out = ComplexMatrix::zeros(d, d);
        for col in 0..d {
            let mut v = scatter(&b.basis[col], len);
            apply_tensor_power(s, self.n, &mut v);
            for row in 0..d {
                out[(row, col)] = sparse_dot(&b.basis[row], &v);
            }
        }
        out
    }

    /// `B†σ^{⊗n}B` for spin `two_j / 2`, identical for every block of that spin.
    pub fn restricted(&self, s: &ComplexMatrix, two_j: usize) -> Result<ComplexMatrix> {
        let &rep = self
            .representative
            .get(&two_j)
            .ok_or_else(|| Error::Validation(format!("no block with 2j = {two_j} for n = {}", self.n)))?;
        Ok(self.restricted_block(s, rep))
    }

    fn check_qubit(&self, s: &ComplexMatrix) -> Result<()> {
        if s.nrows() != 2 || s.ncols() != 2 {
            return Err(Error::Validation("the irrep machinery needs single-qubit operators".into()));
        }
        Ok(())
    }

    /// Largest norm of the component of `σ^{⊗n}|b⟩` leaving block `b`, over
    /// all basis vectors. Zero exactly when every block is invariant.
    pub fn leakage(&self, s: &ComplexMatrix) -> Result<f64> {
        self.check_qubit(s)?;
        let len = 1usize << self.n;
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            for v0 in &b.basis {
                let mut v = scatter(v0, len);
                apply_tensor_power(s, self.n, &mut v);
                let mut inside = ComplexVector::zeros(len);
                for u in &b.basis {
                    let coef = sparse_dot(u, &v);
                    for &(i, x) in u {
                        inside[i as usize] += coef * x;
                    }
                }
                worst = worst.max((v - inside).norm());
            }
        }
        Ok(worst)
    }

    /// Largest deviation of the Gram matrix of all basis vectors from the
    /// identity; covers orthogonality and, with `2^n` vectors, completeness.
    pub fn orthonormality_residual(&self) -> f64 {
        let all: Vec<&SparseVec> = self.blocks.iter().flat_map(|b| b.basis.iter()).collect();
        let len = 1usize << self.n;
        let dense: Vec<Vec<f64>> = all
            .iter()
            .map(|v| {
                let mut d = vec![0.0; len];
                for &(i, x) in v.iter() {
                    d[i as usize] = x;
                }
                d
            })
            .collect();
        let mut worst: f64 = 0.0;
        for (a, va) in all.iter().enumerate() {
            for (b, db) in dense.iter().enumerate().skip(a) {
                let dot: f64 = va.iter().map(|&(i, x)| x * db[i as usize]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Dense projector onto one block.
    pub fn projector(&self, block: usize) -> Result<HermitianOperator> {
        if self.n > MAX_DENSE_QUBITS + 2 {
            return Err(Error::Capacity(format!("dense projectors need n <= {}", MAX_DENSE_QUBITS + 2)));
        }
        let len = 1usize << self.n;
        let mut p = ComplexMatrix::zeros(len, len);
        for v in &self.blocks[block].basis {
            for &(i, x) in v {
                for &(k, y) in v {
                    p[(i as usize, k as usize)] += cr(x * y);
                }
            }
        }
        Ok(HermitianOperator::from_hermitian_part(p))
    }

    /// The blocks as a dense PVM, labelled by `j`.
    pub fn to_pvm(&self) -> Result<Pvm> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::Capacity(format!("dense PVMs need n <= {MAX_DENSE_QUBITS}")));
        }
        let elements = (0..self.len()).map(|i| self.projector(i)).collect::<Result<Vec<_>>>()?;
        let values = self.blocks.iter().map(|b| b.two_j as f64 / 2.0).collect();
        Ok(Pvm::from_projectors(elements, values))
    }
}

/// Eigen-decomposition with a canonical basis inside degenerate eigenspaces:
/// Gram–Schmidt of the projected standard basis vectors, first nonzero
/// coordinate made real positive, vectors sorted by eigenvalue and then by
/// the position and value of that coordinate.
pub fn canonical_eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let tol = tolerances();
    let spec = eig_matrix(m);
    let d = m.nrows();
    let mut values = Vec::with_capacity(d);
    let mut vectors: Vec<ComplexVector> = Vec::with_capacity(d);
    let mut i = 0;
    while i < d {
        let mut j = i + 1;
        while j < d && (spec.eigenvalues[j] - spec.eigenvalues[i]).abs() <= tol.eigen_merge {
            j += 1;
        }
        let mean = spec.eigenvalues[i..j].iter().sum::<f64>() / (j - i) as f64;
        let mut cluster: Vec<ComplexVector> = if j - i == 1 {
            vec![spec.eigenvectors.column(i).into_owned()]
        } else {
            let v = spec.eigenvectors.columns(i, j - i).into_owned();
            let proj = &v * v.adjoint();
            let mut acc: Vec<ComplexVector> = Vec::new();
            for e in 0..d {
                if acc.len() == j - i {
                    break;
                }
                let mut u = proj.column(e).into_owned();
                for a in &acc {
                    let coef = a.dotc(&u);
                    u -= a * coef;
                }
                let norm = u.norm();
                if norm > 1e-6 {
                    acc.push(u / cr(norm));
                }
            }
            acc
        };
        for v in &mut cluster {
            if let Some(k) = (0..d).find(|&k| v[k].norm() > 1e-10) {
                let phase = v[k] / cr(v[k].norm());
                *v /= phase;
            }
        }
        cluster.sort_by(|a, b| {
            let fa = (0..d).find(|&k| a[k].norm() > 1e-10).unwrap_or(d);
            let fb = (0..d).find(|&k| b[k].norm() > 1e-10).unwrap_or(d);
            fa.cmp(&fb).then_with(|| {
                let va = if fa < d { a[fa].re } else { 0.0 };
                let vb = if fb < d { b[fb].re } else { 0.0 };
                vb.total_cmp(&va)
            })
        });
        for v in cluster {
            values.push(mean);
            vectors.push(v);
        }
        i = j;
    }
    let w = ComplexMatrix::from_columns(&vectors);
    (values, w)
}

/// Rank-one refinement `E^n_θ` of the irrep decomposition by the spectral
/// measure of `ρ_θ^{⊗n}`.
#[derive(Debug, Clone)]
pub struct RefinedPvm {
    irreps: Arc<IrrepPvm>,
    base_theta: f64,
    // 2j ↦ eigenvectors (columns) of the restricted state.
    eig: BTreeMap<usize, ComplexMatrix>,
}

/// Probabilities of one spin sector: every block of that spin has the same
/// outcome distribution over its `2j + 1` refined outcomes.
#[derive(Debug, Clone)]
pub struct SectorProbabilities {
    pub two_j: usize,
    pub multiplicity: usize,
    pub probabilities: Vec<f64>,
}

pub fn refine_with_state<F: StateFamily + ?Sized>(e: &Arc<IrrepPvm>, family: &F, theta: f64) -> Result<RefinedPvm> {
    if family.dim() != 2 {
        return Err(Error::Validation(format!(
            "the refined PVM needs a qubit family, got dimension {}",
            family.dim()
        )));
    }
    let rho = family.state(theta)?;
    refine_with_density(e, &rho, theta)
}

/// Refinement by an explicit qubit state.
pub fn refine_with_density(e: &Arc<IrrepPvm>, rho: &DensityMatrix, base_theta: f64) -> Result<RefinedPvm> {
    e.check_qubit(rho.matrix())?;
    let mut eig = BTreeMap::new();
    for two_j in e.two_j_values() {
        let r = e.restricted(rho.matrix(), two_j)?;
        let (_, w) = canonical_eigh(&crate::linalg::HermitianOperator::from_hermitian_part(r).into_matrix());
        eig.insert(two_j, w);
    }
    Ok(RefinedPvm {
        irreps: Arc::clone(e),
        base_theta,
        eig,
    })
}

impl RefinedPvm {
    pub fn n(&self) -> usize {
        self.irreps.n
    }

    pub fn irreps(&self) -> &Arc<IrrepPvm> {
        &self.irreps
    }

    pub fn base_theta(&self) -> f64 {
        self.base_theta
    }

    /// Number of outcomes, `2^n`.
    pub fn len(&self) -> usize {
        1 << self.irreps.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-sector outcome probabilities under `σ^{⊗n}`.
    pub fn sector_probabilities(&self, sigma: &DensityMatrix) -> Result<Vec<SectorProbabilities>> {
        self.irreps.check_qubit(sigma.matrix())?;
        let mut out = Vec::with_capacity(self.eig.len());
        for (&two_j, w) in &self.eig {
            let r = self.irreps.restricted(sigma.matrix(), two_j)?;
            let probs = (0..w.ncols())
                .map(|k| {
                    let col = w.column(k);
                    (col.adjoint() * &r * col)[(0, 0)].re.max(0.0)
                })
                .collect();
            out.push(SectorProbabilities {
                two_j,
                multiplicity: self.irreps.multiplicity(two_j),
                probabilities: probs,
            });
        }
        Ok(out)
    }

    /// Full outcome distribution, ordered block by block.
    pub fn probabilities(&self, sigma: &DensityMatrix) -> Result<Vec<f64>> {
        let sectors: BTreeMap<usize, Vec<f64>> = self
            .sector_probabilities(sigma)?
            .into_iter()
            .map(|s| (s.two_j, s.probabilities))
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for b in &self.irreps.blocks {
            out.extend_from_slice(&sectors[&b.two_j]);
        }
        Ok(out)
    }

    /// KL divergence between the outcome distributions of two states.
    pub fn kl(&self, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
        let p = self.sector_probabilities(rho)?;
        let q = self.sector_probabilities(sigma)?;
        let mut total = 0.0;
        for (a, b) in p.iter().zip(&q) {
            total += a.multiplicity as f64 * kl_discrete(&a.probabilities, &b.probabilities);
        }
        Ok(total)
    }

    /// Outcome `(block, k)` as a dense unit vector.
    pub fn vector(&self, outcome: usize) -> ComplexVector {
        let mut idx = outcome;
        for b in &self.irreps.blocks {
            if idx < b.dim() {
                let w = &self.eig[&b.two_j];
                let len = 1usize << self.irreps.n;
                let mut v = ComplexVector::zeros(len);
                for (m, basis) in b.basis.iter().enumerate() {
                    let coef = w[(m, idx)];
                    for &(i, x) in basis {
                        v[i as usize] += coef * x;
                    }
                }
                return v;
            }
            idx -= b.dim();
        }
        panic!("outcome {outcome} out of range");
    }

    /// Block index containing each outcome.
    pub fn outcome_blocks(&self) -> Vec<usize> {
        self.irreps
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| std::iter::repeat_n(i, b.dim()))
            .collect()
    }

    /// Dense rank-one PVM, labelled by outcome index.
    pub fn to_pvm(&self) -> Result<Pvm> {
        if self.irreps.n > MAX_DENSE_QUBITS {
            return Err(Error::Capacity(format!("dense PVMs need n <= {MAX_DENSE_QUBITS}")));
        }
        let elements = (0..self.len())
            .map(|k| {
                let v = self.vector(k);
                HermitianOperator::from_hermitian_part(&v * v.adjoint())
            })
            .collect();
        let values = (0..self.len()).map(|k| k as f64).collect();
        Ok(Pvm::from_projectors(elements, values))
    }
}

/// `D^{E^m_{θ1}}(θ0‖θ1)`.
pub fn sandwich_kl<F: StateFamily + ?Sized>(family: &F, theta0: f64, theta1: f64, m: usize) -> Result<f64> {
    if m > 10 {
        return Err(Error::Capacity(format!("sandwich_kl supports m <= 10, got {m}")));
    }
    let e = qubit_irrep_pvm(m)?;
    let refined = refine_with_state(&e, family, theta1)?;
    refined.kl(&family.state(theta0)?, &family.state(theta1)?)
}

/// Checks that every fine element lies inside one coarse element and that
/// the coarse elements are sums of fine ones.
fn check_refinement(coarse: &Pvm, fine: &Pvm) -> Result<()> {
    let d = coarse.dim();
    if fine.dim() != d {
        return Err(Error::Validation("PVM dimensions differ".into()));
    }
    let mut sums = vec![ComplexMatrix::zeros(d, d); coarse.len()];
    for (k, f) in fine.as_povm().elements().iter().enumerate() {
        let host = coarse
            .as_povm()
            .elements()
            .iter()
            .position(|e| max_abs(&(e.matrix() * f.matrix() - f.matrix())) <= 1e-8);
        match host {
            Some(i) => sums[i] += f.matrix(),
            None => {
                return Err(Error::Structure(format!(
                    "fine element {k} does not lie inside a single coarse element"
                )))
            }
        }
    }
    for (i, e) in coarse.as_povm().elements().iter().enumerate() {
        if max_abs(&(e.matrix() - &sums[i])) > 1e-8 {
            return Err(Error::Structure(format!("coarse element {i} is not a sum of fine elements")));
        }
    }
    Ok(())
}

fn check_commutes(coarse: &Pvm, rho: &DensityMatrix) -> Result<()> {
    for (i, e) in coarse.as_povm().elements().iter().enumerate() {
        let comm = e.matrix() * rho.matrix() - rho.matrix() * e.matrix();
        if max_abs(&comm) > 1e-8 {
            return Err(Error::Structure(format!("state does not commute with coarse element {i}")));
        }
    }
    Ok(())
}

/// `D(ρ‖E_F(ρ))`, bounded by `log w(E)` when `E ≤ F` and ρ commutes with `E`.
pub fn pinching_loss(coarse: &Pvm, fine: &Pvm, rho: &DensityMatrix) -> Result<f64> {
    check_refinement(coarse, fine)?;
    check_commutes(coarse, rho)?;
    relative_entropy(rho, &pinching(fine, rho)?)
}

/// Minimum eigenvalue of `w(E)·E_M(ρ) − ρ`.
pub fn operator_dominance_check(coarse: &Pvm, fine: &Pvm, rho: &DensityMatrix) -> Result<f64> {
    check_refinement(coarse, fine)?;
    check_commutes(coarse, rho)?;
    let w = coarse.max_rank() as f64;
    let pinched = pinching(fine, rho)?;
    let diff = pinched.matrix() * cr(w) - rho.matrix();
    Ok(eig_hermitian(HermitianOperator::from_hermitian_part(diff)).min_eigenvalue())
}

/// Minimum eigenvalue of `ρ^{−t} − w(E)^{−t} E_M(ρ)^{−t}` for full-rank ρ.
pub fn operator_dominance_power_check(coarse: &Pvm, fine: &Pvm, rho: &DensityMatrix, t: f64) -> Result<f64> {
    check_refinement(coarse, fine)?;
    check_commutes(coarse, rho)?;
    let w = coarse.max_rank() as f64;
    let pinched = pinching(fine, rho)?;
    let pow = |x: f64| x.powf(-t);
    let a = eig_hermitian(rho).apply(pow, crate::linalg::KernelPolicy::Error)?;
    let b = eig_hermitian(&pinched).apply(pow, crate::linalg::KernelPolicy::Error)?;
    let diff = a.matrix() - b.matrix() * cr(w.powf(-t));
    Ok(eig_hermitian(HermitianOperator::from_hermitian_part(diff)).min_eigenvalue())
}

/// `Σ_k ⟨v_k|ρ|v_k⟩ f(s_k)` over the eigenpairs `(s_k, v_k)` of σ.
fn trace_with_function<F: Fn(f64) -> f64>(rho: &DensityMatrix, sigma: &DensityMatrix, f: F) -> f64 {
    let spec = eig_hermitian(sigma);
    let r = spec.to_eigenbasis(rho.matrix());
    spec.clamped_eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let w = r[(k, k)].re.max(0.0);
            if w == 0.0 {
                0.0
            } else {
                w * f(s)
            }
        })
        .sum()
}

/// `Tr ρ log σ`, `−∞` when ρ has weight on the kernel of σ.
fn trace_log(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let kernel = tolerances().kernel;
    trace_with_function(rho, sigma, |s| if s <= kernel { f64::NEG_INFINITY } else { s.ln() })
}

/// `log Tr ρ σ^t`; negative `t` puts `+∞` on the kernel of σ.
fn log_trace_power(rho: &DensityMatrix, sigma: &DensityMatrix, t: f64) -> f64 {
    let kernel = tolerances().kernel;
    trace_with_function(rho, sigma, |s| {
        if s <= kernel {
            if t < 0.0 {
                f64::INFINITY
            } else if t == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            s.powf(t)
        }
    })
    .ln()
}

/// Upper limit of the numerically maximized `t ≥ 0` ranges.
pub const T_MAX: f64 = 50.0;

/// Bounds `(b1, b2)` on the two deviation events of Lemma 8 for the refined
/// measurement `E^n_{θ1}` and a qubit family.
pub fn lemma8_bounds<F: StateFamily + ?Sized>(
    family: &F,
    theta0: f64,
    theta1: f64,
    theta2: f64,
    delta: f64,
    n: usize,
) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::Validation(format!("delta = {delta} must be positive")));
    }
    if n == 0 {
        return Err(Error::Validation("n must be positive".into()));
    }
    if family.dim() != 2 {
        return Err(Error::Validation("Lemma 8 bounds are implemented for qubit families".into()));
    }
    let r0 = family.state(theta0)?;
    let r1 = family.state(theta1)?;
    let r2 = family.state(theta2)?;
    let nf = n as f64;
    let k = 2.0;
    let c2 = trace_log(&r0, &r2);
    let c1 = trace_log(&r0, &r1);
    let penalty = (k + 1.0) * (nf + 1.0).ln() / nf;
    let f1 = |t: f64| {
        let v = (delta - c2) * t - t * penalty - log_trace_power(&r0, &r2, -t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let f2 = |t: f64| {
        let v = (delta + c1) * t - log_trace_power(&r0, &r1, t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (_, s1) = golden_section_max(f1, 0.0, 1.0, 1e-10);
    let (_, s2) = golden_section_max(f2, 0.0, T_MAX, 1e-9);
    Ok(((-nf * s1.max(0.0)).exp(), (-nf * s2.max(0.0)).exp()))
}

/// Exact probabilities of the two Lemma 8 events by enumerating the
/// outcomes of `E^n_{θ1}`.
pub fn lemma8_exact<F: StateFamily + ?Sized>(
    family: &F,
    theta0: f64,
    theta1: f64,
    theta2: f64,
    delta: f64,
    n: usize,
) -> Result<(f64, f64)> {
    let e = qubit_irrep_pvm(n)?;
    let refined = refine_with_state(&e, family, theta1)?;
    let r0 = family.state(theta0)?;
    let r1 = family.state(theta1)?;
    let r2 = family.state(theta2)?;
    let p0 = refined.probabilities(&r0)?;
    let p1 = refined.probabilities(&r1)?;
    let p2 = refined.probabilities(&r2)?;
    let c1 = trace_log(&r0, &r1);
    let c2 = trace_log(&r0, &r2);
    let nf = n as f64;
    let slack = 1e-12;
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for i in 0..p0.len() {
        if p0[i] == 0.0 {
            continue;
        }
        if -p2[i].ln() / nf + c2 >= delta - slack {
            e1 += p0[i];
        }
        if p1[i].ln() / nf - c1 >= delta - slack {
            e2 += p0[i];
        }
    }
    Ok((e1, e2))
}

/// Lemma 19 / Eq. (F2): `P^M_ρ{log P^M_σ ≥ a} ≤ exp(−sup_{t≥0}(a t − log Tr ρσ^t))`
/// for a rank-one PVM `M` commuting with σ.
pub fn markov_bound_f2(rho: &DensityMatrix, sigma: &DensityMatrix, a: f64) -> f64 {
    let f = |t: f64| {
        let v = a * t - log_trace_power(rho, sigma, t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (_, s) = golden_section_max(f, 0.0, T_MAX, 1e-9);
    (-s.max(0.0)).exp()
}

/// Lemma 20 / Eq. (L11.1):
/// `P^M_ρ{−log P^M_ρ′ ≥ a} ≤ exp(−sup_{0≤t≤1}((a − log w)t − log Tr ρρ′^{−t}))`.
pub fn markov_bound_l11(rho: &DensityMatrix, rho_prime: &DensityMatrix, a: f64, w: usize) -> f64 {
    let lw = (w as f64).ln();
    let f = |t: f64| {
        let v = (a - lw) * t - log_trace_power(rho, rho_prime, -t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (_, s) = golden_section_max(f, 0.0, 1.0, 1e-10);
    (-s.max(0.0)).exp()
}

/// The block measurement of the order-of-limits construction: with weight δ
/// the faithful single-copy POVM applied to each of the `m` copies, with
/// weight `1 − δ` the refined PVM `E^m_{θ0}`.
///
/// Outcomes `0..K^m` are product outcomes (copy 1 most significant) and
/// outcomes `K^m..K^m + 2^m` are refined outcomes.
#[derive(Debug, Clone)]
pub struct BlockPovm {
    single: Povm,
    m: usize,
    refined: RefinedPvm,
    delta: f64,
}

/// Largest `m` for which [`BlockPovm::materialize`] builds dense elements.
pub const MAX_MATERIALIZED_BLOCK: usize = 3;

pub fn madaptive_block_povm<F: StateFamily + ?Sized>(family: &F, theta0: f64, m: usize, delta: f64) -> Result<BlockPovm> {
    if m == 0 || m > 8 {
        return Err(Error::Capacity(format!("block size m = {m} must lie in 1..=8")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Validation(format!("mixing weight {delta} must lie in (0, 1)")));
    }
    let e = qubit_irrep_pvm(m)?;
    let refined = refine_with_state(&e, family, theta0)?;
    Ok(BlockPovm {
        single: faithful_povm(2)?,
        m,
        refined,
        delta,
    })
}

impl BlockPovm {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn single(&self) -> &Povm {
        &self.single
    }

    pub fn refined(&self) -> &RefinedPvm {
        &self.refined
    }

    pub fn product_outcomes(&self) -> usize {
        self.single.len().pow(self.m as u32)
    }

    pub fn len(&self) -> usize {
        self.product_outcomes() + self.refined.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Single-copy faithful distribution and refined distribution under `ρ`.
    pub fn component_probabilities(&self, rho: &DensityMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((
            distribution(&self.single, rho)?.probabilities,
            self.refined.probabilities(rho)?,
        ))
    }

    /// Probability of one encoded outcome given the component distributions.
    pub fn outcome_probability(&self, single: &[f64], refined: &[f64], outcome: usize) -> f64 {
        let np = self.product_outcomes();
        if outcome < np {
            let k = self.single.len();
            let mut rest = outcome;
            let mut p = self.delta;
            for _ in 0..self.m {
                p *= single[rest % k];
                rest /= k;
            }
            p
        } else {
            (1.0 - self.delta) * refined[outcome - np]
        }
    }

    /// Full outcome distribution under `ρ^{⊗m}`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        let (s, r) = self.component_probabilities(rho)?;
        Ok((0..self.len()).map(|o| self.outcome_probability(&s, &r, o)).collect())
    }

    /// `D^{M}(ρ‖σ) = δ·m·D^{single} + (1 − δ)·D^{E^m}`.
    pub fn kl(&self, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
        let p = distribution(&self.single, rho)?.probabilities;
        let q = distribution(&self.single, sigma)?.probabilities;
        let single = kl_discrete(&p, &q);
        let refined = self.refined.kl(rho, sigma)?;
        Ok(self.delta * self.m as f64 * single + (1.0 - self.delta) * refined)
    }

    /// Lower bound `δ·TV_single + (1 − δ)·TV_refined` on the total-variation
    /// distance of the induced distributions.
    pub fn tv_lower_bound(&self, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
        let (ps, pr) = self.component_probabilities(rho)?;
        let (qs, qr) = self.component_probabilities(sigma)?;
        let tv = |a: &[f64], b: &[f64]| 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        Ok(self.delta * tv(&ps, &qs) + (1.0 - self.delta) * tv(&pr, &qr))
    }

    /// Draws one outcome under `ρ^{⊗m}`.
    pub fn sample<R: Rng + ?Sized>(&self, single: &[f64], refined: &[f64], rng: &mut R) -> usize {
        if rng.random::<f64>() < self.delta {
            let k = self.single.len();
            let mut idx = 0;
            let mut scale = 1;
            for _ in 0..self.m {
                idx += categorical(single, rng) * scale;
                scale *= k;
            }
            idx
        } else {
            self.product_outcomes() + categorical(refined, rng)
        }
    }

    /// Dense POVM on the `m`-copy space; only for small `m`.
    pub fn materialize(&self) -> Result<Povm> {
        if self.m > MAX_MATERIALIZED_BLOCK {
            return Err(Error::Capacity(format!(
                "dense block POVM needs m <= {MAX_MATERIALIZED_BLOCK}, got {}",
                self.m
            )));
        }
        let k = self.single.len();
        let mut elements = Vec::with_capacity(self.len());
        for o in 0..self.product_outcomes() {
            let mut digits = Vec::with_capacity(self.m);
            let mut rest = o;
            for _ in 0..self.m {
                digits.push(rest % k);
                rest /= k;
            }
            // Digit i belongs to copy i + 1 counted from the least significant end.
            let mut acc = self.single.elements()[digits[self.m - 1]].matrix().clone();
            for i in (0..self.m - 1).rev() {
                acc = crate::linalg::kron(&acc, self.single.elements()[digits[i]].matrix());
            }
            elements.push(HermitianOperator::from_hermitian_part(acc * cr(self.delta)));
        }
        for r in 0..self.refined.len() {
            let v = self.refined.vector(r);
            elements.push(HermitianOperator::from_hermitian_part(&v * v.adjoint() * cr(1.0 - self.delta)));
        }
        let values = (0..elements.len()).map(|i| i as f64).collect();
        Povm::new(elements, values)
    }
}

/// Qubit state with Bloch vector `(x, y, z)`.
pub fn bloch_state(x: f64, y: f64, z: f64) -> Result<DensityMatrix> {
    let m = ComplexMatrix::from_row_slice(
        2,
        2,
        &[cr(0.5 * (1.0 + z)), c(0.5 * x, -0.5 * y), c(0.5 * x, 0.5 * y), cr(0.5 * (1.0 - z))],
    );
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::EquatorialQubitFamily;

    #[test]
    fn small_dimensions() {
        let mut d2 = qubit_irrep_pvm(2).unwrap().dims();
        d2.sort();
        assert_eq!(d2, vec![1, 3]);
        let mut d3 = qubit_irrep_pvm(3).unwrap().dims();
        d3.sort();
        assert_eq!(d3, vec![2, 2, 4]);
        let e8 = qubit_irrep_pvm(8).unwrap();
        assert_eq!(e8.max_dim(), 9);
        assert_eq!(e8.dims().iter().sum::<usize>(), 256);
        assert!(matches!(qubit_irrep_pvm(13), Err(Error::Capacity(_))));
    }

    #[test]
    fn singlet_is_antisymmetric() {
        let e = qubit_irrep_pvm(2).unwrap();
        let singlet = e.blocks().iter().find(|b| b.two_j == 0).unwrap();
        let v = singlet.basis_vector(0, 2);
        let s = 0.5f64.sqrt();
        assert!((v[1].re + s).abs() < 1e-15 || (v[1].re - s).abs() < 1e-15);
        assert!((v[1].re + v[2].re).abs() < 1e-15);
        assert_eq!(v[0].re, 0.0);
    }

    #[test]
    fn orthonormal_and_invariant() {
        for n in 2..=6 {
            let e = qubit_irrep_pvm(n).unwrap();
            assert!(e.orthonormality_residual() <= 1e-12);
            let s = bloch_state(0.3, -0.2, 0.5).unwrap();
            assert!(e.leakage(s.matrix()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn restriction_is_block_independent() {
        let e = qubit_irrep_pvm(5).unwrap();
        let s = bloch_state(0.1, 0.4, -0.3).unwrap();
        for two_j in e.two_j_values() {
            let r = e.restricted(s.matrix(), two_j).unwrap();
            for (i, b) in e.blocks().iter().enumerate() {
                if b.two_j == two_j {
                    assert!(max_abs(&(e.restricted_block(s.matrix(), i) - &r)) < 1e-13);
                }
            }
        }
    }

    #[test]
    fn sandwich_example() {
        let f = EquatorialQubitFamily::new(0.5).unwrap();
        let d = 0.25 * (1.0 - 0.5f64.cos()) * 3f64.ln();
        let v = sandwich_kl(&f, 0.5, 0.0, 4).unwrap();
        assert!(v <= 4.0 * d + 1e-9);
        assert!(v >= 4.0 * d - 5f64.ln() - 1e-9);
        assert!(sandwich_kl(&f, 0.3, 0.3, 3).unwrap().abs() < 1e-12);
    }

    #[test]
    fn block_povm_base_case_materializes() {
        let f = EquatorialQubitFamily::new(0.5).unwrap();
        let b = madaptive_block_povm(&f, 0.2, 2, 0.5).unwrap();
        let m = b.materialize().unwrap();
        assert_eq!(m.len(), 36 + 4);
        let rho = f.state(0.7).unwrap();
        let dense = distribution(&m, &crate::linalg::tensor_power(&rho, 2).unwrap()).unwrap();
        let structured = b.probabilities(&rho).unwrap();
        for (a, s) in dense.probabilities.iter().zip(&structured) {
            assert!((a - s).abs() < 1e-12);
        }
    }
}
