//! Spectral decomposition of symmetric positive semidefinite matrices.
//!
//! The default solver is cyclic Jacobi with a fixed row-major sweep order,
//! which makes the output a deterministic function of the input bits.
//! Eigenvalues come out descending, eigenvectors are normalized so that
//! their largest-magnitude entry is positive (lowest index on ties).

use crate::error::{Error, Result};
use crate::model::CovarianceSequence;
use crate::toeplitz::truncate;
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    /// Cyclic Jacobi below `jacobi_limit`, Householder/QR above.
    Auto,
    Jacobi,
    /// nalgebra's tridiagonal QR; same ordering and sign conventions.
    Tridiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Rotations are skipped for |a_pq| below this fraction of ‖T‖_F.
    pub rotation_threshold: f64,
    pub max_sweeps: usize,
    pub size_cap: usize,
    pub solver: Solver,
    pub jacobi_limit: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            rotation_threshold: 1e-14,
            max_sweeps: 64,
            size_cap: 4096,
            solver: Solver::Auto,
            jacobi_limit: 512,
        }
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    source_n: usize,
    sweeps: usize,
    off_norm: f64,
}

impl SpectrumResult {
    /// λ_1 ≥ … ≥ λ_N, negative round-off clamped to zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the orthonormal eigenvectors, in eigenvalue order.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn off_norm(&self) -> f64 {
        self.off_norm
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// U Λ Uᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }

    /// `‖UᵀU − I‖_max` and `‖T − UΛUᵀ‖_F` against the decomposed matrix.
    pub fn residuals(&self, t: &DMatrix<f64>) -> (f64, f64) {
        let n = self.source_n;
        let gram = self.eigenvectors.transpose() * &self.eigenvectors;
        let ortho = (gram - DMatrix::<f64>::identity(n, n)).amax();
        let recon = (t - self.reconstruct()).norm();
        (ortho, recon)
    }
}

/// Full decomposition Σ = U Λ Uᵀ of a symmetric PSD matrix.
pub fn eigendecompose(t: &DMatrix<f64>, opts: &EigenOptions) -> Result<SpectrumResult> {
    let n = t.nrows();
    if t.ncols() != n {
        return Err(Error::dimension("square matrix", format!("{}x{}", n, t.ncols())));
    }
    if n == 0 {
        return Err(Error::validation("N", "empty matrix"));
    }
    if n > opts.size_cap {
        return Err(Error::OutOfRange {
            what: "matrix size",
            value: n,
            range: format!("1..={}", opts.size_cap),
        });
    }
    let scale = t.amax().max(1.0);
    let mut max_asym: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            max_asym = max_asym.max((t[(i, j)] - t[(j, i)]).abs());
        }
    }
    if max_asym > SYMMETRY_TOL * scale {
        return Err(Error::NonSymmetric {
            max_asymmetry: max_asym,
        });
    }

    let use_jacobi = match opts.solver {
        Solver::Jacobi => true,
        Solver::Tridiagonal => false,
        Solver::Auto => n <= opts.jacobi_limit,
    };
    let (values, vectors, sweeps, off_norm) = if use_jacobi {
        jacobi(t, opts)?
    } else {
        let sym = t.clone().symmetric_eigen();
        let v: Vec<f64> = sym.eigenvalues.iter().copied().collect();
        (v, sym.eigenvectors, 0, 0.0)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let lambda_max = values[order[0]];
    let floor = -PSD_TOL * lambda_max.max(1.0);
    let lambda_min = values[order[n - 1]];
    if lambda_min < floor {
        return Err(Error::Indefinite {
            min_eigenvalue: lambda_min,
        });
    }

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(values[src].max(0.0));
        let mut col = vectors.column(src).clone_owned();
        if col[pivot_index(col.as_slice())] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }

    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors,
        source_n: n,
        sweeps,
        off_norm,
    })
}

/// Index of the largest-magnitude entry, lowest index among entries that
/// tie within a relative 1e-10.
fn pivot_index(v: &[f64]) -> usize {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-10))
        .unwrap_or(0)
}

type JacobiOutput = (Vec<f64>, DMatrix<f64>, usize, f64);

fn jacobi(t: &DMatrix<f64>, opts: &EigenOptions) -> Result<JacobiOutput> {
    let n = t.nrows();
    // Row-major working copies: a[i * n + j].
    let mut a: Vec<f64> = (0..n * n).map(|k| t[(k / n, k % n)]).collect();
    let mut v: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    let threshold = opts.rotation_threshold * t.norm();

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    let mut off_norm = off(&a);
    while off_norm > threshold {
        if sweeps == opts.max_sweeps {
            return Err(Error::NoConvergence { sweeps, off_norm });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= threshold {
                    continue;
                }
                rotated = true;
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let tan = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + tan * tan).sqrt();
                let s = tan * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        off_norm = off(&a);
        if !rotated {
            break;
        }
    }

    let values = (0..n).map(|i| a[i * n + i]).collect();
    let vectors = DMatrix::from_row_slice(n, n, &v);
    Ok((values, vectors, sweeps, off_norm))
}

/// k-th eigenvalue of Σ_N along increasing window lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylTrack {
    /// 1-based eigenvalue index.
    pub k: usize,
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    /// Value at the largest N, the running estimate of λ_k(Σ).
    pub limit_estimate: f64,
    /// Largest decrease `values[i] − values[i+1]` relative to
    /// `max(values[i+1], 1)`; nonpositive when the track is monotone.
    pub max_violation: f64,
}

impl WeylTrack {
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.max_violation <= rel_tol
    }
}

pub fn weyl_track(cov: &CovarianceSequence, ns: &[usize], k: usize, opts: &EigenOptions) -> Result<WeylTrack> {
    if k == 0 {
        return Err(Error::OutOfRange {
            what: "eigenvalue index k",
            value: k,
            range: format!("1..={}", ns.first().copied().unwrap_or(0)),
        });
    }
    Ok(weyl_tracks(cov, ns, k, opts)?.pop().expect("k >= 1 tracks"))
}

/// Tracks for k = 1..=k_max, sharing one eigendecomposition per N.
pub fn weyl_tracks(cov: &CovarianceSequence, ns: &[usize], k_max: usize, opts: &EigenOptions) -> Result<Vec<WeylTrack>> {
    if ns.is_empty() {
        return Err(Error::validation("Ns", "empty list of window lengths"));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("Ns", "window lengths must be strictly increasing"));
    }
    if k_max == 0 || k_max > ns[0] {
        return Err(Error::OutOfRange {
            what: "eigenvalue index k",
            value: k_max,
            range: format!("1..={}", ns[0]),
        });
    }
    let mut table = Vec::with_capacity(ns.len());
    for &n in ns {
        let t = truncate(cov, n)?;
        let s = eigendecompose(t.dense(), opts)?;
        table.push(s.eigenvalues()[..k_max].to_vec());
    }
    Ok((1..=k_max)
        .map(|k| {
            let values: Vec<f64> = table.iter().map(|row| row[k - 1]).collect();
            let max_violation = values
                .windows(2)
                .map(|w| (w[0] - w[1]) / w[1].max(1.0))
                .fold(f64::NEG_INFINITY, f64::max);
            WeylTrack {
                k,
                ns: ns.to_vec(),
                limit_estimate: *values.last().expect("nonempty"),
                max_violation: if ns.len() > 1 { max_violation } else { 0.0 },
                values,
            }
        })
        .collect())
}

/// Number of eigenvalues exceeding `rel_threshold · λ_1`.
pub fn effective_rank(s: &SpectrumResult, rel_threshold: f64) -> Result<usize> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::validation("threshold", format!("{rel_threshold} not in (0, 1)")));
    }
    let cut = rel_threshold * s.largest();
    Ok(s.eigenvalues().iter().filter(|&&l| l > cut).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{covariance_from_symbol, QuadratureSpec, Symbol};
    use std::f64::consts::PI;

    fn opts() -> EigenOptions {
        EigenOptions::default()
    }

    fn cosine_matrix(n: usize, theta: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| (theta * (i as f64 - j as f64)).cos())
    }

    #[test]
    fn identity_spectrum() {
        let s = eigendecompose(&DMatrix::identity(3, 3), &opts()).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.sweeps(), 0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let s = eigendecompose(&t, &opts()).unwrap();
        assert!((s.eigenvalues()[0] - 1.5).abs() < 1e-15);
        assert!((s.eigenvalues()[1] - 0.5).abs() < 1e-15);
        let r = 0.5f64.sqrt();
        let u = s.eigenvectors();
        assert!((u[(0, 0)] - r).abs() < 1e-15 && (u[(1, 0)] - r).abs() < 1e-15);
        assert!((u[(0, 1)] - r).abs() < 1e-15 && (u[(1, 1)] + r).abs() < 1e-15);
    }

    #[test]
    fn cosine_rank_two_oracle() {
        // Oracle: Σ_8 = vvᵀ + wwᵀ with v_t = cos θt, w_t = sin θt, and for
        // θ = 2π/8 both have squared norm 4 and are orthogonal, so the
        // nonzero eigenvalues are exactly 4 and 4.
        let theta = 2.0 * PI / 8.0;
        let v: Vec<f64> = (0..8).map(|t| (theta * t as f64).cos()).collect();
        let w: Vec<f64> = (0..8).map(|t| (theta * t as f64).sin()).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let ww: f64 = w.iter().map(|x| x * x).sum();
        let vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((vv - 4.0).abs() < 1e-14 && (ww - 4.0).abs() < 1e-14 && vw.abs() < 1e-14);

        let s = eigendecompose(&cosine_matrix(8, theta), &opts()).unwrap();
        assert!((s.eigenvalues()[0] - 4.0).abs() < 1e-12);
        assert!((s.eigenvalues()[1] - 4.0).abs() < 1e-12);
        assert!(s.eigenvalues()[2..].iter().all(|&l| l < 1e-10));
        assert_eq!(effective_rank(&s, 0.5).unwrap(), 2);
    }

    #[test]
    fn invariants_hold_for_builtin_families() {
        let q = QuadratureSpec::default();
        let symbols = [
            Symbol::white(),
            Symbol::ar1(0.9).unwrap(),
            Symbol::band_limited(PI / 4.0).unwrap(),
            Symbol::lines(&[(PI / 3.0, 1.0), (PI / 5.0, 2.0)]).unwrap(),
        ];
        for sym in &symbols {
            let cov = covariance_from_symbol(sym, 63, &q).unwrap();
            for n in [2, 4, 8, 16, 32, 64] {
                let t = truncate(&cov, n).unwrap();
                let s = eigendecompose(t.dense(), &opts()).unwrap();
                let (ortho, recon) = s.residuals(t.dense());
                let l1 = s.largest();
                assert!(ortho <= 1e-10, "{} N={n}: ortho {ortho}", sym.label());
                assert!(recon <= 1e-9 * l1.max(1.0), "{} N={n}: recon {recon}", sym.label());
                assert!(s.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
                let tr = s.trace();
                assert!((tr - t.trace()).abs() <= 1e-9 * t.trace(), "{} N={n}", sym.label());
                if let Some(sup) = sym.ess_sup() {
                    assert!(l1 <= sup + 1e-8, "{} N={n}: {l1} > {sup}", sym.label());
                }
            }
        }
    }

    #[test]
    fn deterministic_and_sign_normalized() {
        let cov = covariance_from_symbol(&Symbol::ar1(0.5).unwrap(), 19, &QuadratureSpec::default()).unwrap();
        let t = truncate(&cov, 20).unwrap();
        let a = eigendecompose(t.dense(), &opts()).unwrap();
        let b = eigendecompose(t.dense(), &opts()).unwrap();
        assert_eq!(a.eigenvalues(), b.eigenvalues());
        assert_eq!(a.eigenvectors(), b.eigenvectors());
        for j in 0..20 {
            let col: Vec<f64> = a.eigenvectors().column(j).iter().copied().collect();
            assert!(col[pivot_index(&col)] > 0.0);
        }
    }

    #[test]
    fn tridiagonal_solver_agrees_on_eigenvalues() {
        let cov = covariance_from_symbol(&Symbol::band_limited(1.0).unwrap(), 39, &QuadratureSpec::default()).unwrap();
        let t = truncate(&cov, 40).unwrap();
        let j = eigendecompose(t.dense(), &opts()).unwrap();
        let q = eigendecompose(
            t.dense(),
            &EigenOptions {
                solver: Solver::Tridiagonal,
                ..opts()
            },
        )
        .unwrap();
        for (a, b) in j.eigenvalues().iter().zip(q.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
        let (ortho, recon) = q.residuals(t.dense());
        assert!(ortho < 1e-10 && recon < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(eigendecompose(&asym, &opts()), Err(Error::NonSymmetric { .. })));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(eigendecompose(&indef, &opts()), Err(Error::Indefinite { .. })));
        let capped = EigenOptions { size_cap: 2, ..opts() };
        assert!(eigendecompose(&DMatrix::identity(3, 3), &capped).is_err());
        let starved = EigenOptions { max_sweeps: 1, ..opts() };
        let cov = covariance_from_symbol(&Symbol::ar1(0.9).unwrap(), 15, &QuadratureSpec::default()).unwrap();
        let t = truncate(&cov, 16).unwrap();
        assert!(matches!(eigendecompose(t.dense(), &starved), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn weyl_tracks() {
        let q = QuadratureSpec::default();
        let white = covariance_from_symbol(&Symbol::white(), 40, &q).unwrap();
        let w = weyl_track(&white, &[4, 8, 16], 1, &opts()).unwrap();
        assert!(w.values.iter().all(|v| (v - 1.0).abs() < 1e-13));

        let theta0 = 0.9;
        let cosine = covariance_from_symbol(&Symbol::lines(&[(theta0, 1.0)]).unwrap(), 40, &q).unwrap();
        let c = weyl_track(&cosine, &[8, 16, 32], 1, &opts()).unwrap();
        assert!(c.is_monotone(1e-10));
        // Oracle: λ_1 = N/2 + |Σ_t e^{2iθt}|/2 for the rank-2 cosine matrix.
        for (&n, &v) in c.ns.iter().zip(&c.values) {
            let (re, im) = (0..n).fold((0.0, 0.0), |(r, i), t| {
                let ph = 2.0 * theta0 * t as f64;
                (r + ph.cos(), i + ph.sin())
            });
            let want = 0.5 * n as f64 + 0.5 * (re * re + im * im).sqrt();
            assert!((v - want).abs() < 1e-10, "N={n}: {v} vs {want}");
        }

        let ar = covariance_from_symbol(&Symbol::ar1(0.5).unwrap(), 128, &q).unwrap();
        let t = weyl_track(&ar, &[2, 4, 8, 16, 32, 64, 128], 1, &opts()).unwrap();
        assert!(t.is_monotone(1e-10));
        assert!(t.limit_estimate <= 3.0 + 1e-8 && t.limit_estimate > 2.99);

        assert!(weyl_track(&ar, &[4, 8], 5, &opts()).is_err());
        assert!(weyl_track(&ar, &[8, 4], 1, &opts()).is_err());
    }

    #[test]
    fn slepian_plunge_count() {
        let cov = covariance_from_symbol(&Symbol::band_limited(PI / 4.0).unwrap(), 127, &QuadratureSpec::default())
            .unwrap();
        let s = eigendecompose(truncate(&cov, 128).unwrap().dense(), &opts()).unwrap();
        let r = effective_rank(&s, 0.5).unwrap();
        assert!((29..=35).contains(&r), "{r}");
        let white = eigendecompose(&DMatrix::identity(16, 16), &opts()).unwrap();
        assert_eq!(effective_rank(&white, 0.5).unwrap(), 16);
        assert!(effective_rank(&white, 1.0).is_err());
    }
}
