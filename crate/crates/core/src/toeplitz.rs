//! Toeplitz truncations Σ_N of a covariance sequence and quadratic forms
//! ψᵀ Σ ψ against finitely supported test functions.

use crate::error::{Error, Result};
use crate::model::CovarianceSequence;
use nalgebra::DMatrix;
use std::io::Write;
use std::sync::OnceLock;

/// The N×N covariance of the window `[t, t+N)`. Stationarity makes it
/// independent of `t`, so no offset is stored.
#[derive(Debug, Clone)]
pub struct ToeplitzTruncation {
    first_row: Vec<f64>,
    dense: OnceLock<DMatrix<f64>>,
}

impl ToeplitzTruncation {
    pub fn from_first_row(first_row: Vec<f64>) -> Result<Self> {
        if first_row.is_empty() {
            return Err(Error::validation("N", "window length must be at least 1"));
        }
        Ok(ToeplitzTruncation {
            first_row,
            dense: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    /// Materialized matrix with `T[i][j] = σ(|i - j|)`, built on first use.
    pub fn dense(&self) -> &DMatrix<f64> {
        self.dense.get_or_init(|| {
            let n = self.n();
            DMatrix::from_fn(n, n, |i, j| self.first_row[i.abs_diff(j)])
        })
    }

    pub fn trace(&self) -> f64 {
        self.n() as f64 * self.first_row[0]
    }
}

/// Σ_N for a window of length `n`.
pub fn truncate(cov: &CovarianceSequence, n: usize) -> Result<ToeplitzTruncation> {
    if n == 0 {
        return Err(Error::validation("N", "window length must be at least 1"));
    }
    if cov.tau_max() + 1 < n {
        return Err(Error::InsufficientLags {
            available: cov.tau_max(),
            required: n - 1,
            window: n,
        });
    }
    ToeplitzTruncation::from_first_row(cov.values()[..n].to_vec())
}

/// A finitely supported sequence ψ with `ψ(offset + k) = coefficients[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    offset: i64,
    coefficients: Vec<f64>,
}

impl TestFunction {
    pub fn new(offset: i64, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("psi", "coefficients must be finite"));
        }
        if coefficients.iter().all(|&c| c == 0.0) {
            return Err(Error::validation("psi", "at least one coefficient must be nonzero"));
        }
        Ok(TestFunction { offset, coefficients })
    }

    /// Supported on `[0, N)`.
    pub fn at_origin(coefficients: Vec<f64>) -> Result<Self> {
        TestFunction::new(0, coefficients)
    }

    /// The k-th canonical basis vector of length `n`.
    pub fn unit(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::OutOfRange {
                what: "basis index",
                value: k,
                range: format!("0..{n}"),
            });
        }
        let mut a = vec![0.0; n];
        a[k] = 1.0;
        TestFunction::at_origin(a)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn shifted(&self, offset: i64) -> Self {
        TestFunction {
            offset,
            coefficients: self.coefficients.clone(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// ψ̂(e^{iω}) = Σ_k ψ(k) e^{iωk} as `(re, im)`.
    pub fn transform(&self, omega: f64) -> (f64, f64) {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, &a) in self.coefficients.iter().enumerate() {
            let phase = omega * (self.offset + k as i64) as f64;
            re += a * phase.cos();
            im += a * phase.sin();
        }
        (re, im)
    }

    /// |ψ̂(e^{iω})|², computed with the support shifted to the origin.
    pub fn transform_power(&self, omega: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, &a) in self.coefficients.iter().enumerate() {
            let phase = omega * k as f64;
            re += a * phase.cos();
            im += a * phase.sin();
        }
        re * re + im * im
    }

    /// r(τ) = Σ_i a_i a_{i+τ} for τ = 0..N.
    pub fn autocorrelation(&self) -> Vec<f64> {
        let a = &self.coefficients;
        (0..a.len())
            .map(|tau| a.iter().zip(&a[tau..]).map(|(x, y)| x * y).sum())
            .collect()
    }
}

/// Symmetric operators that can be probed with a test function.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn form(&self, a: &[f64]) -> f64;
    fn check_square(&self) -> Result<()> {
        Ok(())
    }
}

impl SymmetricOperator for ToeplitzTruncation {
    fn dim(&self) -> usize {
        self.n()
    }

    /// Banded accumulation σ(0) r(0) + 2 Σ_{τ≥1} σ(τ) r(τ).
    fn form(&self, a: &[f64]) -> f64 {
        let sigma = &self.first_row;
        let mut acc = 0.0;
        for tau in 0..a.len() {
            let r: f64 = a.iter().zip(&a[tau..]).map(|(x, y)| x * y).sum();
            acc += if tau == 0 { sigma[0] * r } else { 2.0 * sigma[tau] * r };
        }
        acc
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn check_square(&self) -> Result<()> {
        if self.nrows() == self.ncols() {
            Ok(())
        } else {
            Err(Error::dimension("square matrix", format!("{}x{}", self.nrows(), self.ncols())))
        }
    }

    fn form(&self, a: &[f64]) -> f64 {
        let n = self.nrows();
        let mut acc = 0.0;
        for j in 0..n {
            let col = self.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * a[i];
            }
            acc += a[j] * s;
        }
        acc
    }
}

/// ψᵀ T ψ. Only the coefficients enter; the support offset is irrelevant
/// for a stationary covariance.
pub fn quadratic_form<T: SymmetricOperator + ?Sized>(t: &T, psi: &TestFunction) -> Result<f64> {
    if t.dim() != psi.len() {
        return Err(Error::dimension(format!("test function of length {}", t.dim()), psi.len()));
    }
    t.check_square()?;
    Ok(t.form(psi.coefficients()))
}

/// ‖A − B‖_F.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dimension(format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Diagonal averaging: the nearest symmetric Toeplitz matrix in Frobenius norm.
pub fn toeplitzify(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut row = vec![0.0; n];
    for (tau, slot) in row.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..n - tau {
            s += m[(i, i + tau)] + m[(i + tau, i)];
        }
        *slot = s / (2 * (n - tau)) as f64;
    }
    DMatrix::from_fn(n, n, |i, j| row[i.abs_diff(j)])
}

/// One matrix row per line, comma separated, round-trip decimal.
pub fn write_dense_csv<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
