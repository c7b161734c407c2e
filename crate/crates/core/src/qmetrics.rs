//! Quantum Fisher informations, relative entropy, Bures distance and affinity.
//!
//! The Fisher informations are computed in the eigenbasis of ρ, where each
//! logarithmic derivative is an entrywise rescaling of `B = dρ/dθ`.

use crate::config::{tolerances, Tolerances};
use crate::error::{Error, Result};
use crate::families::StateFamily;
use crate::linalg::{
    check_same_dim, cr, eig_hermitian, max_abs, trace_norm_product, ComplexMatrix, DensityMatrix,
    HermitianOperator, SpectralDecomposition,
};

/// All three Fisher informations of one tangent direction.
#[derive(Debug, Clone)]
pub struct FisherReport {
    pub j_sld: f64,
    /// `+∞` when `B` connects the kernel and the support of ρ.
    pub j_kmb: f64,
    /// `None` for singular ρ.
    pub j_rld: Option<f64>,
    pub sld_operator: HermitianOperator,
    /// `None` exactly when `j_kmb` is infinite.
    pub kmb_operator: Option<HermitianOperator>,
}

struct Eigen {
    spec: SpectralDecomposition,
    p: Vec<f64>,
    b: ComplexMatrix,
}

fn eigen_setup(rho: &DensityMatrix, b: &HermitianOperator, tol: &Tolerances) -> Result<Eigen> {
    check_same_dim(rho.dim(), b.dim())?;
    let spec = eig_hermitian(rho);
    let p = spec
        .eigenvalues
        .iter()
        .map(|&x| if x <= tol.kernel { 0.0 } else { x })
        .collect();
    let bt = spec.to_eigenbasis(b.matrix());
    Ok(Eigen { spec, p, b: bt })
}

/// Symmetric logarithmic derivative `L` solving `(Lρ + ρL)/2 = B`, and
/// `J = Tr ρ L²`.
pub fn sld_and_fisher(rho: &DensityMatrix, b: &HermitianOperator) -> Result<(HermitianOperator, f64)> {
    let tol = tolerances();
    let e = eigen_setup(rho, b, &tol)?;
    let d = rho.dim();
    let mut l = ComplexMatrix::zeros(d, d);
    let mut j = 0.0;
    for i in 0..d {
        for k in 0..d {
            let s = e.p[i] + e.p[k];
            let bik = e.b[(i, k)];
            if s == 0.0 {
                if bik.norm() > tol.support {
                    return Err(Error::Support(format!(
                        "derivative has weight {:e} on the kernel of the state",
                        bik.norm()
                    )));
                }
                continue;
            }
            l[(i, k)] = bik * cr(2.0 / s);
            j += 2.0 * bik.norm_sqr() / s;
        }
    }
    Ok((HermitianOperator::from_hermitian_part(e.spec.from_eigenbasis(&l)), j))
}

/// Entrywise KMB kernel `(log p − log q)/(p − q)`, with the limit `1/p` on
/// (near-)degenerate pairs.
fn kmb_kernel(p: f64, q: f64, degenerate: f64) -> f64 {
    if (p - q).abs() <= degenerate {
        2.0 / (p + q)
    } else {
        (p.ln() - q.ln()) / (p - q)
    }
}

/// KMB logarithmic derivative `L̃` solving `∫₀¹ ρ^t L̃ ρ^{1−t} dt = B`, and
/// `J̃ = Tr B L̃`.
///
/// Errors with [`Error::InfiniteFisher`] when `B` couples the kernel of ρ to
/// its support, where `J̃` diverges; [`kmb_fisher`] maps that case to `+∞`.
pub fn kmb_and_fisher(rho: &DensityMatrix, b: &HermitianOperator) -> Result<(HermitianOperator, f64)> {
    let tol = tolerances();
    let e = eigen_setup(rho, b, &tol)?;
    let d = rho.dim();
    let mut l = ComplexMatrix::zeros(d, d);
    let mut j = 0.0;
    for i in 0..d {
        for k in 0..d {
            let bik = e.b[(i, k)];
            let (pi, pk) = (e.p[i], e.p[k]);
            if pi == 0.0 || pk == 0.0 {
                if bik.norm() > tol.support {
                    if pi == 0.0 && pk == 0.0 {
                        return Err(Error::Support(format!(
                            "derivative has weight {:e} on the kernel of the state",
                            bik.norm()
                        )));
                    }
                    return Err(Error::InfiniteFisher(format!(
                        "derivative couples kernel and support with weight {:e}",
                        bik.norm()
                    )));
                }
                continue;
            }
            let kern = kmb_kernel(pi, pk, tol.degenerate);
            l[(i, k)] = bik * cr(kern);
            j += bik.norm_sqr() * kern;
        }
    }
    Ok((HermitianOperator::from_hermitian_part(e.spec.from_eigenbasis(&l)), j))
}

/// `J̃` with the kernel/support divergence reported as `+∞`.
pub fn kmb_fisher(rho: &DensityMatrix, b: &HermitianOperator) -> Result<f64> {
    match kmb_and_fisher(rho, b) {
        Ok((_, j)) => Ok(j),
        Err(Error::InfiniteFisher(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// RLD Fisher information `Tr B ρ^{−1} B` for strictly positive ρ.
pub fn rld_fisher(rho: &DensityMatrix, b: &HermitianOperator) -> Result<f64> {
    let tol = tolerances();
    check_same_dim(rho.dim(), b.dim())?;
    let spec = eig_hermitian(rho);
    let min = spec.min_eigenvalue();
    if min < tol.positive {
        return Err(Error::Rank(min));
    }
    let bt = spec.to_eigenbasis(b.matrix());
    let d = rho.dim();
    let mut j = 0.0;
    for i in 0..d {
        for k in 0..d {
            j += bt[(i, k)].norm_sqr() / spec.eigenvalues[k];
        }
    }
    Ok(j)
}

/// SLD, KMB and (when defined) RLD information together.
pub fn fisher_report(rho: &DensityMatrix, b: &HermitianOperator) -> Result<FisherReport> {
    let (sld_operator, j_sld) = sld_and_fisher(rho, b)?;
    let (kmb_operator, j_kmb) = match kmb_and_fisher(rho, b) {
        Ok((l, j)) => (Some(l), j),
        Err(Error::InfiniteFisher(_)) => (None, f64::INFINITY),
        Err(e) => return Err(e),
    };
    let j_rld = match rld_fisher(rho, b) {
        Ok(j) => Some(j),
        Err(Error::Rank(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(FisherReport {
        j_sld,
        j_kmb,
        j_rld,
        sld_operator,
        kmb_operator,
    })
}

/// Fisher report of a family at θ.
pub fn family_fisher<F: StateFamily + ?Sized>(family: &F, theta: f64) -> Result<FisherReport> {
    let rho = family.state(theta)?;
    let b = family.derivative(theta)?;
    fisher_report(&rho, &b)
}

/// `‖(Lρ + ρL)/2 − B‖_max`.
pub fn sld_residual(rho: &DensityMatrix, l: &HermitianOperator, b: &HermitianOperator) -> f64 {
    let lr = l.matrix() * rho.matrix();
    let sym = (&lr + lr.adjoint()) * cr(0.5);
    max_abs(&(sym - b.matrix()))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `‖∫₀¹ ρ^t L̃ ρ^{1−t} dt − B‖_max` by 64-point Gauss–Legendre.
pub fn kmb_quadrature_residual(rho: &DensityMatrix, l: &HermitianOperator, b: &HermitianOperator) -> f64 {
    let (nodes, weights) = gauss_legendre_unit(64);
    let spec = eig_hermitian(rho);
    let p = spec.clamped_eigenvalues();
    let lt = spec.to_eigenbasis(l.matrix());
    let d = rho.dim();
    let pow = |x: f64, t: f64| if x <= 0.0 { 0.0 } else { x.powf(t) };
    let mut acc = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for k in 0..d {
            let w: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &wt)| wt * pow(p[i], t) * pow(p[k], 1.0 - t))
                .sum();
            acc[(i, k)] = lt[(i, k)] * cr(w);
        }
    }
    max_abs(&(spec.from_eigenbasis(&acc) - b.matrix()))
}

/// `D(ρ‖σ) = Tr ρ(log ρ − log σ)`; `+∞` when ρ has weight on the kernel of σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let tol = tolerances();
    let es = eig_hermitian(sigma);
    let rho_s = es.to_eigenbasis(rho.matrix());
    let mut cross = 0.0;
    let mut off_support = 0.0;
    for (k, &s) in es.eigenvalues.iter().enumerate() {
        let w = rho_s[(k, k)].re;
        if s <= tol.kernel {
            off_support += w.max(0.0);
        } else {
            cross += w * s.ln();
        }
    }
    if off_support > tol.support {
        return Ok(f64::INFINITY);
    }
    let er = eig_hermitian(rho);
    let ent: f64 = er
        .eigenvalues
        .iter()
        .filter(|&&p| p > tol.kernel)
        .map(|&p| p * p.ln())
        .sum();
    Ok(ent - cross)
}

/// `D(ρ_θ‖ρ_θ0)` within a family. Uses the family's exact `log ρ` when it
/// has one, otherwise falls back to [`relative_entropy`].
pub fn family_relative_entropy<F: StateFamily + ?Sized>(family: &F, theta: f64, theta0: f64) -> Result<f64> {
    let rho = family.state(theta)?;
    match (family.log_state(theta), family.log_state(theta0)) {
        (Some(a), Some(b)) => {
            let diff = a?.matrix() - b?.matrix();
            Ok((rho.matrix() * diff).trace().re.max(0.0))
        }
        _ => relative_entropy(&rho, &family.state(theta0)?),
    }
}

/// Fidelity `Tr|√ρ√σ|`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(trace_norm_product(rho, sigma)?.clamp(0.0, 1.0))
}

/// Bures distance `√(2(1 − Tr|√ρ√σ|))`.
pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok((2.0 * (1.0 - f)).max(0.0).sqrt())
}

/// Quantum affinity `−8 log Tr|√ρ√σ|`; `+∞` for orthogonal supports.
pub fn affinity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    if f <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-8.0 * f.ln())
}

/// One row of a finite-difference limit table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub eps: f64,
    /// `2 D(ρ_{θ+ε}‖ρ_θ)/ε²`
    pub two_d: f64,
    /// `4 b²(ρ_θ, ρ_{θ+ε})/ε²`
    pub four_b2: f64,
    /// `I(ρ_θ‖ρ_{θ+ε})/ε²`
    pub affinity: f64,
    pub j_sld: f64,
    pub j_kmb: f64,
}

/// Rescaled divergences at each ε next to the Fisher informations they
/// approach as ε → 0.
pub fn limit_table<F: StateFamily + ?Sized>(family: &F, theta: f64, eps_grid: &[f64]) -> Result<Vec<LimitRow>> {
    let dom = family.domain();
    dom.require(theta)?;
    let rho = family.state(theta)?;
    let b = family.derivative(theta)?;
    let (_, j_sld) = sld_and_fisher(&rho, &b)?;
    let j_kmb = kmb_fisher(&rho, &b)?;
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if !(eps > 0.0) {
            return Err(Error::Validation(format!("epsilon {eps} must be positive")));
        }
        for t in [theta - eps, theta + eps] {
            if !dom.contains(t) {
                return Err(Error::Domain(format!("theta ± eps = {t} is outside the family domain {dom}")));
            }
        }
        let shifted = family.state(theta + eps)?;
        let e2 = eps * eps;
        let b2 = bures_distance(&rho, &shifted)?.powi(2);
        rows.push(LimitRow {
            eps,
            two_d: 2.0 * family_relative_entropy(family, theta + eps, theta)? / e2,
            four_b2: 4.0 * b2 / e2,
            affinity: affinity(&rho, &shifted)? / e2,
            j_sld,
            j_kmb,
        });
    }
    Ok(rows)
}
