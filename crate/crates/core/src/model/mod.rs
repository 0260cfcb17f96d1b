//! Spectral symbols, covariance sequences and the quadrature that links them.

pub mod io;
pub mod quadrature;
pub mod symbol;

pub use quadrature::{GaussLegendre, QuadratureSpec};
pub use symbol::{Line, Symbol, SymbolFamily};

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Largest lag accepted by [`covariance_from_symbol`]; the dense
/// eigensolver downstream is cubic in the window length.
pub const TAU_MAX_CAP: usize = 4096;

/// Covariances σ(0), …, σ(τmax) of a real stationary process.
/// Negative lags follow from σ(-τ) = σ(τ).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSequence {
    values: Vec<f64>,
    origin: Option<Symbol>,
    quadrature_residual: f64,
}

impl CovarianceSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("sigma", "empty covariance sequence"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("sigma[{i}]"), "not a finite number"));
        }
        if !(values[0] > 0.0) {
            return Err(Error::validation("sigma[0]", format!("variance {} must be positive", values[0])));
        }
        Ok(CovarianceSequence {
            values,
            origin: None,
            quadrature_residual: 0.0,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tau_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn variance(&self) -> f64 {
        self.values[0]
    }

    /// σ(τ) for any integer lag within range.
    pub fn at(&self, tau: i64) -> Option<f64> {
        self.values.get(tau.unsigned_abs() as usize).copied()
    }

    pub fn origin(&self) -> Option<&Symbol> {
        self.origin.as_ref()
    }

    /// Largest change observed between the quadrature rule and its
    /// panel-doubled refinement; zero for closed forms and ingested data.
    pub fn quadrature_residual(&self) -> f64 {
        self.quadrature_residual
    }
}

/// σ(τ) = (1/2π) ∫ φ(e^{iθ}) e^{iθτ} dθ for τ = 0..=tau_max.
///
/// Line spectra use the closed form Σ p_k cos(θ_k τ). Densities use
/// composite Gauss–Legendre on `[0, π]` (evenness folds the circle) with
/// breakpoints on panel edges, and are accepted only if doubling the panel
/// count moves no lag by more than `quad.tolerance · σ(0)`.
pub fn covariance_from_symbol(symbol: &Symbol, tau_max: usize, quad: &QuadratureSpec) -> Result<CovarianceSequence> {
    if tau_max > TAU_MAX_CAP {
        return Err(Error::validation(
            "tau_max",
            format!("{tau_max} exceeds cap {TAU_MAX_CAP}; use covariance_from_symbol_uncapped"),
        ));
    }
    covariance_from_symbol_uncapped(symbol, tau_max, quad)
}

/// [`covariance_from_symbol`] without the lag cap.
pub fn covariance_from_symbol_uncapped(
    symbol: &Symbol,
    tau_max: usize,
    quad: &QuadratureSpec,
) -> Result<CovarianceSequence> {
    quad.validate()?;
    if let Some(lines) = symbol.scaled_lines() {
        let values = (0..=tau_max)
            .map(|tau| {
                lines
                    .iter()
                    .map(|l| l.power * (l.frequency * tau as f64).cos())
                    .sum()
            })
            .collect();
        let mut cov = CovarianceSequence::new(values)?;
        cov.origin = Some(symbol.clone());
        return Ok(cov);
    }

    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let panels = quad.panels_for(tau_max);
    let coarse = fourier_coefficients(symbol, tau_max, &rule, panels);
    let fine = fourier_coefficients(symbol, tau_max, &rule, 2 * panels);
    let residual = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let reference = fine[0].abs().max(f64::MIN_POSITIVE);
    if residual > quad.tolerance * reference {
        return Err(Error::Accuracy {
            residual,
            tolerance: quad.tolerance * reference,
        });
    }
    let mut cov = CovarianceSequence::new(fine)?;
    cov.origin = Some(symbol.clone());
    cov.quadrature_residual = residual;
    Ok(cov)
}

fn fourier_coefficients(symbol: &Symbol, tau_max: usize, rule: &GaussLegendre, panels: usize) -> Vec<f64> {
    let edges = quadrature::panel_edges(panels, &symbol.breakpoints());
    quadrature::integrate_many(rule, &edges, tau_max + 1, |theta, w, acc| {
        let f = symbol.density(theta).unwrap_or(0.0) * w / PI;
        for (tau, slot) in acc.iter_mut().enumerate() {
            *slot += f * (theta * tau as f64).cos();
        }
    })
}

/// Truncated Fourier sum Σ_{|τ| ≤ τmax} e^{-iθτ} σ(τ) on `grid`.
///
/// The imaginary part is accumulated lag by lag in ascending order from
/// `-τmax` and must cancel to within `1e-12 · σ(0)`.
pub fn partial_symbol(cov: &CovarianceSequence, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::validation("grid", "empty frequency grid"));
    }
    let k = cov.tau_max() as i64;
    let sigma = cov.values();
    let mut out = Vec::with_capacity(grid.len());
    for (i, &theta) in grid.iter().enumerate() {
        if !(theta.is_finite() && theta.abs() <= PI + 1e-12) {
            return Err(Error::validation(format!("grid[{i}]"), format!("{theta} not in [-π, π]")));
        }
        // Real part uses folded cosines so that θ and -θ give identical bits.
        let t = theta.abs();
        let mut re = sigma[0];
        for (tau, s) in sigma.iter().enumerate().skip(1) {
            re += 2.0 * s * (t * tau as f64).cos();
        }
        let mut im = 0.0;
        for tau in -k..=k {
            im -= sigma[tau.unsigned_abs() as usize] * (theta * tau as f64).sin();
        }
        if im.abs() > 1e-12 * sigma[0] {
            return Err(Error::Consistency {
                what: format!("imaginary residual of partial symbol at θ = {theta}"),
                lhs: im.abs(),
                rhs: 1e-12 * sigma[0],
            });
        }
        out.push(re);
    }
    Ok(out)
}
