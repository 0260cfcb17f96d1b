//! Stationary extension of a rank-n window approximation.
//!
//! A purely deterministic process of rank n is generated by
//! ξ(t+1) = A ξ(t), z(t) = c ξ(t) with A orthogonal. Starting from the
//! weighted principal basis B = Uₙ Λₙ^{1/2} of a window covariance, row k
//! of B plays the role of c A^k: we solve the shift equations
//! B[0..N-1] Ã = B[1..N] in least squares, take the nearest orthogonal
//! matrix to Ã as A, read c off the first row, and fix P = E ξξᵀ = I.

use crate::error::{Error, Result};
use crate::model::Line;
use crate::pca::RankNApproximation;
use crate::toeplitz::{toeplitzify, TestFunction};
use nalgebra::{DMatrix, RowDVector};
use std::f64::consts::PI;

/// Shift systems whose singular values spread beyond this ratio are
/// treated as rank deficient.
const SHIFT_RANK_RATIO: f64 = 1e-10;
/// Smallest admissible singular value of the least-squares shift before
/// polar projection.
const POLAR_MIN_SV: f64 = 1e-12;
/// Lines closer than this (radians) are merged.
const LINE_RESOLUTION: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct StateSpaceRealization {
    a: DMatrix<f64>,
    c: RowDVector<f64>,
    p: DMatrix<f64>,
    basis_window: usize,
    diagnostics: RealizationDiagnostics,
}

/// Measured residuals of a realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationDiagnostics {
    /// ‖AᵀA − I‖_F
    pub orthogonality_residual: f64,
    /// Smallest singular value of [c; cA; …; cA^{n-1}].
    pub observability_sv: f64,
    /// ‖c‖, the scale for the observability threshold.
    pub readout_norm: f64,
    /// ‖APAᵀ − P‖_F
    pub stationarity_residual: f64,
    /// ‖B[0..N-1] Ã − B[1..N]‖_F / ‖B‖_F before orthogonal projection.
    pub shift_residual: f64,
    /// ‖A − Ã‖_F, the size of the polar correction.
    pub polar_correction: f64,
}

impl RealizationDiagnostics {
    /// Orthogonality, observability and stationarity within the given
    /// absolute tolerances.
    pub fn holds(&self, ortho_tol: f64, stationarity_tol: f64) -> bool {
        self.orthogonality_residual <= ortho_tol
            && self.observability_sv > 1e-8 * self.readout_norm
            && self.stationarity_residual <= stationarity_tol
    }
}

impl StateSpaceRealization {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn readout(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn state_covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Window length the realization was built from.
    pub fn basis_window(&self) -> usize {
        self.basis_window
    }

    pub fn diagnostics(&self) -> &RealizationDiagnostics {
        &self.diagnostics
    }

    /// σ̂ⁿ(0), …, σ̂ⁿ(τmax) by repeated multiplication c A^τ P cᵀ.
    pub fn covariances(&self, tau_max: usize) -> Vec<f64> {
        let pc = &self.p * self.c.transpose();
        let mut row = self.c.clone();
        let mut out = Vec::with_capacity(tau_max + 1);
        for tau in 0..=tau_max {
            if tau > 0 {
                row = &row * &self.a;
            }
            out.push((&row * &pc)[(0, 0)]);
        }
        out
    }
}

pub fn stationary_extension(approx: &RankNApproximation) -> Result<StateSpaceRealization> {
    let big_n = approx.window();
    let n = approx.rank();
    if big_n < n + 1 {
        return Err(Error::OutOfRange {
            what: "rank n",
            value: n,
            range: format!("1..={} for window length {big_n}", big_n.saturating_sub(1)),
        });
    }
    let weights: Vec<f64> = approx.kept_eigenvalues().iter().map(|l| l.sqrt()).collect();
    let mut b = approx.basis().clone();
    for (j, w) in weights.iter().enumerate() {
        b.column_mut(j).scale_mut(*w);
    }
    let up = b.rows(0, big_n - 1).clone_owned();
    let down = b.rows(1, big_n - 1).clone_owned();

    let svd = up.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(ratio >= SHIFT_RANK_RATIO) {
        return Err(Error::DegenerateBasis { n, ratio });
    }
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    // Ã = V Σ⁻¹ Uᵀ · down
    let mut ut_down = u.transpose() * &down;
    for i in 0..n {
        let s = sv[i];
        ut_down.row_mut(i).scale_mut(1.0 / s);
    }
    let shift = vt.transpose() * ut_down;

    let shift_residual = (&up * &shift - &down).norm() / b.norm();

    let polar = shift.clone().svd(true, true);
    let pmin = polar.singular_values.min();
    if !(pmin >= POLAR_MIN_SV) {
        return Err(Error::Conditioning { singular_value: pmin });
    }
    let a = polar.u.as_ref().expect("requested") * polar.v_t.as_ref().expect("requested");

    let c = b.row(0).clone_owned();
    let p = DMatrix::<f64>::identity(n, n);
    let diagnostics = RealizationDiagnostics {
        orthogonality_residual: (a.transpose() * &a - DMatrix::<f64>::identity(n, n)).norm(),
        observability_sv: observability_sv(&a, &c),
        readout_norm: c.norm(),
        stationarity_residual: (&a * &p * a.transpose() - &p).norm(),
        shift_residual,
        polar_correction: (&a - &shift).norm(),
    };
    Ok(StateSpaceRealization {
        a,
        c,
        p,
        basis_window: big_n,
        diagnostics,
    })
}

fn observability_sv(a: &DMatrix<f64>, c: &RowDVector<f64>) -> f64 {
    let n = a.nrows();
    let mut obs = DMatrix::zeros(n, n);
    let mut row = c.clone();
    for k in 0..n {
        if k > 0 {
            row = &row * a;
        }
        obs.set_row(k, &row);
    }
    obs.singular_values().min()
}

/// σ̂ⁿ(τ) = c A^τ P cᵀ.
pub fn extend_covariance(r: &StateSpaceRealization, tau: usize) -> f64 {
    r.covariances(tau)[tau]
}

/// Discrete spectral measure: the Dirac pulses of a rank-n process.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSpectrum {
    lines: Vec<Line>,
}

impl LineSpectrum {
    /// Merges lines closer than the resolution and sorts by frequency.
    pub fn new(mut lines: Vec<Line>) -> Self {
        lines.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        let mut merged: Vec<Line> = Vec::with_capacity(lines.len());
        for l in lines {
            match merged.last_mut() {
                Some(last) if (l.frequency - last.frequency).abs() < LINE_RESOLUTION => last.power += l.power,
                _ => merged.push(l),
            }
        }
        LineSpectrum { lines: merged }
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn total_power(&self) -> f64 {
        self.lines.iter().map(|l| l.power).sum()
    }

    /// Σ_k p_k cos(θ_k τ).
    pub fn covariance(&self, tau: i64) -> f64 {
        self.lines
            .iter()
            .map(|l| l.power * (l.frequency * tau as f64).cos())
            .sum()
    }

    /// ∫ |ψ̂|² dμ = Σ_k p_k |ψ̂(e^{iθ_k})|².
    pub fn quadratic_form(&self, psi: &TestFunction) -> f64 {
        self.lines
            .iter()
            .map(|l| l.power * psi.transform_power(l.frequency))
            .sum()
    }

    /// Frequencies of the underlying unit-circle eigenvalues, counting
    /// interior lines twice (±θ).
    pub fn dirac_count(&self) -> usize {
        self.lines
            .iter()
            .map(|l| if l.frequency < 1e-12 || (PI - l.frequency) < 1e-12 { 1 } else { 2 })
            .sum()
    }
}

/// Splits A into its invariant rotation planes and fixed/flipped axes.
///
/// With the real Schur form A = Q T Qᵀ an orthogonal A has a block
/// diagonal T of 2×2 rotations and ±1 entries. Each block contributes
/// a line whose power is the P-weighted energy of cQ on that block.
pub fn line_spectrum(r: &StateSpaceRealization) -> LineSpectrum {
    let n = r.state_dim();
    let (q, t) = r.a.clone().schur().unpack();
    let cq = &r.c * &q;
    let pq = q.transpose() * &r.p * &q;
    let block_power = |idx: &[usize]| -> f64 {
        let mut s = 0.0;
        for &i in idx {
            for &j in idx {
                s += cq[i] * pq[(i, j)] * cq[j];
            }
        }
        s
    };

    let coupling = 1e-12 * t.amax().max(1.0);
    let mut lines = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > coupling {
            let (a11, a12, a21, a22) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let re = 0.5 * (a11 + a22);
            let det = a11 * a22 - a12 * a21;
            let disc = det - re * re;
            if disc >= 0.0 {
                lines.push(Line {
                    frequency: disc.sqrt().atan2(re),
                    power: block_power(&[i, i + 1]),
                });
            } else {
                // Real pair inside one block: resolve along the eigenvectors
                // of the block's symmetric part.
                let sym = DMatrix::from_row_slice(2, 2, &[a11, 0.5 * (a12 + a21), 0.5 * (a12 + a21), a22]);
                let eig = sym.symmetric_eigen();
                for k in 0..2 {
                    let v = eig.eigenvectors.column(k);
                    let proj = cq[i] * v[0] + cq[i + 1] * v[1];
                    lines.push(Line {
                        frequency: if eig.eigenvalues[k] >= 0.0 { 0.0 } else { PI },
                        power: proj * proj,
                    });
                }
            }
            i += 2;
        } else {
            lines.push(Line {
                frequency: if t[(i, i)] >= 0.0 { 0.0 } else { PI },
                power: block_power(&[i]),
            });
            i += 1;
        }
    }
    LineSpectrum::new(lines)
}

/// ‖Σ̂ − Toeplitz(Σ̂)‖_F / ‖Σ̂‖_F with diagonal averaging as the projection.
pub fn toeplitz_defect(approx: &RankNApproximation) -> f64 {
    let s = approx.sigma_hat();
    let norm = s.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (s - toeplitzify(s)).norm() / norm
}
