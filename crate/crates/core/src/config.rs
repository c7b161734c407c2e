//! Numerical tolerances shared by every module.
//!
//! All thresholds live in one record so that validation, spectral calculus
//! and the divergence routines agree on what "zero", "Hermitian" and
//! "supported" mean. [`Tolerances::default`] carries the standard values;
//! callers that need different thresholds build their own record.

/// Central tolerance record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative Hermiticity slack: `|A_ij - conj(A_ji)| <= hermitian * (1 + max|A|)`.
    pub hermitian: f64,
    /// Smallest admissible eigenvalue of a density matrix.
    pub psd: f64,
    /// Allowed deviation of a density matrix trace from one.
    pub trace: f64,
    /// Eigenvalues in `[-clamp, 0)` are set to zero before spectral functions.
    pub clamp: f64,
    /// Off-support matrix elements below this are treated as zero.
    pub support: f64,
    /// Eigenvalues at or below this are the kernel in Fisher and divergence
    /// calculus.
    pub kernel: f64,
    /// Eigenvalue pairs closer than this use the degenerate-limit KMB form.
    pub degenerate: f64,
    /// Eigenvalues within this distance are merged into one spectral projector.
    pub eigen_merge: f64,
    /// POVM completeness slack `||sum M_i - I||_max`.
    pub completeness: f64,
    /// Minimum eigenvalue for a state to count as strictly positive.
    pub positive: f64,
    /// Largest Hilbert-space dimension the dense routines will build.
    pub max_dim: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            psd: 1e-10,
            trace: 1e-10,
            clamp: 1e-12,
            support: 1e-10,
            kernel: 1e-12,
            degenerate: 1e-12,
            eigen_merge: 1e-10,
            completeness: 1e-9,
            positive: 1e-10,
            max_dim: 4096,
        }
    }
}

/// The default tolerance record.
pub fn tolerances() -> Tolerances {
    Tolerances::default()
}
