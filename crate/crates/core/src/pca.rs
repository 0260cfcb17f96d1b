//! Optimal rank-n linear approximation of a random vector with covariance Σ.
//!
//! Among all M of rank n, E‖y − My‖² is minimized by the orthogonal
//! projector M = UₙUₙᵀ onto the leading n eigenvectors, with minimum
//! λ_{n+1} + … + λ_N. The factor Uₙ is only determined up to Uₙ Qₙ for
//! orthogonal Qₙ; we fix Qₙ = I since M and Σ̂ⁿ do not depend on it.

use crate::error::{Error, Result};
use crate::spectrum::SpectrumResult;
use nalgebra::{DMatrix, DVector};

/// Relative gap below which λ_n and λ_{n+1} are treated as tied.
const DEGENERATE_GAP: f64 = 1e-12;

/// Optimal rank-n approximation of a window covariance.
#[derive(Debug, Clone)]
pub struct RankNApproximation {
    n: usize,
    projector: DMatrix<f64>,
    basis: DMatrix<f64>,
    kept: Vec<f64>,
    sigma_hat: DMatrix<f64>,
    error: f64,
    degenerate_cut: bool,
}

impl RankNApproximation {
    pub fn rank(&self) -> usize {
        self.n
    }

    /// Window length N.
    pub fn window(&self) -> usize {
        self.projector.nrows()
    }

    /// M = Uₙ Uₙᵀ.
    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    /// Uₙ, the N×n block of leading eigenvectors.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// λ_1, …, λ_n.
    pub fn kept_eigenvalues(&self) -> &[f64] {
        &self.kept
    }

    /// Σ̂ⁿ_N = Uₙ diag(λ_1..λ_n) Uₙᵀ, the covariance of ŷ = M y.
    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }

    /// λ_{n+1} + … + λ_N.
    pub fn error(&self) -> f64 {
        self.error
    }

    /// True when λ_n = λ_{n+1} (to relative 1e-12), in which case the
    /// optimal subspace is not unique; the error value is unaffected.
    pub fn degenerate_cut(&self) -> bool {
        self.degenerate_cut
    }
}

pub fn optimal_approximator(s: &SpectrumResult, n: usize) -> Result<RankNApproximation> {
    let big_n = s.source_n();
    if n == 0 || n > big_n {
        return Err(Error::OutOfRange {
            what: "rank n",
            value: n,
            range: format!("1..={big_n}"),
        });
    }
    let lambda = s.eigenvalues();
    let basis = s.eigenvectors().columns(0, n).clone_owned();
    let kept = lambda[..n].to_vec();
    let projector = &basis * basis.transpose();
    let weighted = &basis * DMatrix::from_diagonal(&DVector::from_column_slice(&kept));
    let sigma_hat = weighted * basis.transpose();
    let error = lambda[n..].iter().sum();
    let degenerate_cut = n < big_n && (lambda[n - 1] - lambda[n]).abs() <= DEGENERATE_GAP * lambda[0].max(1.0);
    Ok(RankNApproximation {
        n,
        projector,
        basis,
        kept,
        sigma_hat,
        error,
        degenerate_cut,
    })
}

/// E‖y − My‖² = tr((I − M) T (I − M)ᵀ) for an arbitrary candidate M.
pub fn approximation_error_of(t: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    if t.shape() != m.shape() || t.nrows() != t.ncols() {
        return Err(Error::dimension(format!("{:?}", t.shape()), format!("{:?}", m.shape())));
    }
    let n = t.nrows();
    let e = DMatrix::<f64>::identity(n, n) - m;
    let et = &e * t;
    // tr(E T Eᵀ) = Σ_ij (E T)_ij E_ij
    Ok(et.component_mul(&e).sum().max(0.0))
}

/// Numerical evidence that M has the projection structure of the optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionCertificate {
    /// ‖M − Mᵀ‖_F
    pub symmetry: f64,
    /// ‖M − M²‖_F
    pub idempotency: f64,
    /// ‖MΣ − MΣMᵀ‖_F: the approximation is uncorrelated with its error.
    pub orthogonality: f64,
    /// tr M, which equals rank Π for a projector.
    pub trace: f64,
    pub rank: usize,
    /// ‖Σ‖_F, the scale the orthogonality residual is judged against.
    pub sigma_norm: f64,
    /// ‖M‖_F, the scale the symmetry/idempotency residuals are judged against.
    pub projector_norm: f64,
}

impl ProjectionCertificate {
    /// Passes when every residual is below `rel_tol` times its scale and
    /// tr M is within `rel_tol · n` of n.
    pub fn holds(&self, rel_tol: f64) -> bool {
        let m_scale = self.projector_norm.max(1.0);
        self.symmetry <= rel_tol * m_scale
            && self.idempotency <= rel_tol * m_scale
            && self.orthogonality <= rel_tol * self.sigma_norm.max(f64::MIN_POSITIVE)
            && (self.trace - self.rank as f64).abs() <= rel_tol * (self.rank as f64).max(1.0)
    }

    /// Set when the orthogonality residual exceeds `rel_tol · ‖Σ‖_F`.
    pub fn orthogonality_flagged(&self, rel_tol: f64) -> bool {
        self.orthogonality > rel_tol * self.sigma_norm
    }
}

pub fn projection_certificate(approx: &RankNApproximation, s: &SpectrumResult) -> Result<ProjectionCertificate> {
    certify(approx.projector(), &s.reconstruct(), approx.rank())
}

/// Certificate for any candidate M of claimed rank `rank` against Σ.
pub fn certify(m: &DMatrix<f64>, sigma: &DMatrix<f64>, rank: usize) -> Result<ProjectionCertificate> {
    if m.shape() != sigma.shape() || m.nrows() != m.ncols() {
        return Err(Error::dimension(format!("{:?}", sigma.shape()), format!("{:?}", m.shape())));
    }
    let mt = m.transpose();
    let ms = m * sigma;
    Ok(ProjectionCertificate {
        symmetry: (m - &mt).norm(),
        idempotency: (m - m * m).norm(),
        orthogonality: (&ms - &ms * &mt).norm(),
        trace: m.trace(),
        rank,
        sigma_norm: sigma.norm(),
        projector_norm: m.norm(),
    })
}
