//! Spectral symbols φ(e^{iθ}) of real stationary processes.
//!
//! Every family is stored on the half circle `[0, π]` and extended evenly,
//! so φ(e^{iθ}) = φ(e^{-iθ}) holds by construction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A spectral line at `frequency` in `[0, π]`. For `0 < θ < π` the power
/// counts both the `+θ` and `-θ` halves, so the line contributes
/// `power * cos(θ τ)` to the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub frequency: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolFamily {
    /// φ ≡ 1.
    White,
    /// Indicator of `|θ| <= half_bandwidth`.
    BandLimited { half_bandwidth: f64 },
    /// (1 - ρ²) / (1 - 2ρ cos θ + ρ²), the AR(1) density with σ(τ) = ρ^|τ|.
    Ar1 { rho: f64 },
    /// Discrete measure; never gridded.
    Lines(Vec<Line>),
    /// Piece `j` covers `[breakpoints[j], breakpoints[j+1]]` of `|θ|` and
    /// evaluates the polynomial `Σ_k coefficients[j][k] (|θ| - breakpoints[j])^k`.
    Piecewise {
        breakpoints: Vec<f64>,
        coefficients: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    family: SymbolFamily,
    scale: f64,
}

const POSITIVITY_GRID_PER_PIECE: usize = 64;

impl Symbol {
    pub fn new(family: SymbolFamily, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::validation("scale", format!("{scale} is not a positive finite number")));
        }
        validate_family(&family)?;
        Ok(Symbol { family, scale })
    }

    pub fn white() -> Self {
        Symbol {
            family: SymbolFamily::White,
            scale: 1.0,
        }
    }

    pub fn band_limited(half_bandwidth: f64) -> Result<Self> {
        Symbol::new(SymbolFamily::BandLimited { half_bandwidth }, 1.0)
    }

    pub fn ar1(rho: f64) -> Result<Self> {
        Symbol::new(SymbolFamily::Ar1 { rho }, 1.0)
    }

    pub fn lines(lines: &[(f64, f64)]) -> Result<Self> {
        let lines = lines
            .iter()
            .map(|&(frequency, power)| Line { frequency, power })
            .collect();
        Symbol::new(SymbolFamily::Lines(lines), 1.0)
    }

    pub fn family(&self) -> &SymbolFamily {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_line_spectral(&self) -> bool {
        matches!(self.family, SymbolFamily::Lines(_))
    }

    /// Lines with powers multiplied by the scale, when the symbol is a
    /// discrete measure.
    pub fn scaled_lines(&self) -> Option<Vec<Line>> {
        match &self.family {
            SymbolFamily::Lines(lines) => Some(
                lines
                    .iter()
                    .map(|l| Line {
                        frequency: l.frequency,
                        power: l.power * self.scale,
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Density value at θ (any real θ, reduced to `[0, π]` by evenness and
    /// periodicity). `None` for line-spectral symbols.
    pub fn density(&self, theta: f64) -> Option<f64> {
        let t = fold(theta);
        let base = match &self.family {
            SymbolFamily::White => 1.0,
            SymbolFamily::BandLimited { half_bandwidth } => {
                if t <= *half_bandwidth {
                    1.0
                } else {
                    0.0
                }
            }
            SymbolFamily::Ar1 { rho } => (1.0 - rho * rho) / (1.0 - 2.0 * rho * t.cos() + rho * rho),
            SymbolFamily::Lines(_) => return None,
            SymbolFamily::Piecewise {
                breakpoints,
                coefficients,
            } => eval_piecewise(breakpoints, coefficients, t),
        };
        Some(self.scale * base)
    }

    /// Interior discontinuity locations in `(0, π)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            SymbolFamily::BandLimited { half_bandwidth } if *half_bandwidth < PI => vec![*half_bandwidth],
            SymbolFamily::Piecewise { breakpoints, .. } => {
                breakpoints[1..breakpoints.len() - 1].to_vec()
            }
            _ => Vec::new(),
        }
    }

    /// Essential supremum of φ where it is known in closed form.
    pub fn ess_sup(&self) -> Option<f64> {
        let base = match &self.family {
            SymbolFamily::White | SymbolFamily::BandLimited { .. } => 1.0,
            SymbolFamily::Ar1 { rho } => (1.0 + rho.abs()) / (1.0 - rho.abs()),
            _ => return None,
        };
        Some(self.scale * base)
    }

    /// Short human-readable tag, used in file names and reports.
    pub fn label(&self) -> String {
        match &self.family {
            SymbolFamily::White => "white".to_string(),
            SymbolFamily::BandLimited { half_bandwidth } => format!("bandlimited(W={half_bandwidth})"),
            SymbolFamily::Ar1 { rho } => format!("ar1(rho={rho})"),
            SymbolFamily::Lines(lines) => {
                let parts: Vec<String> = lines
                    .iter()
                    .map(|l| format!("({},{})", l.frequency, l.power))
                    .collect();
                format!("lines{}", parts.join(""))
            }
            SymbolFamily::Piecewise { breakpoints, .. } => {
                format!("piecewise({} pieces)", breakpoints.len() - 1)
            }
        }
    }
}

/// Maps θ to `[0, π]` using 2π-periodicity and evenness.
pub(crate) fn fold(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        2.0 * PI - t
    } else {
        t
    }
}

fn eval_piecewise(breakpoints: &[f64], coefficients: &[Vec<f64>], t: f64) -> f64 {
    // Rightmost piece whose left edge is <= t; pieces are few, linear scan.
    let mut j = 0;
    while j + 1 < coefficients.len() && t >= breakpoints[j + 1] {
        j += 1;
    }
    let x = t - breakpoints[j];
    coefficients[j].iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn validate_family(family: &SymbolFamily) -> Result<()> {
    match family {
        SymbolFamily::White => Ok(()),
        SymbolFamily::BandLimited { half_bandwidth } => {
            let w = *half_bandwidth;
            if w.is_finite() && w > 0.0 && w <= PI {
                Ok(())
            } else {
                Err(Error::validation("W", format!("half-bandwidth {w} not in (0, π]")))
            }
        }
        SymbolFamily::Ar1 { rho } => {
            if rho.is_finite() && rho.abs() < 1.0 {
                Ok(())
            } else {
                Err(Error::validation("rho", format!("pole {rho} not inside the unit disc")))
            }
        }
        SymbolFamily::Lines(lines) => {
            if lines.is_empty() {
                return Err(Error::validation("lines", "at least one line required"));
            }
            for (i, l) in lines.iter().enumerate() {
                if !(l.frequency.is_finite() && (0.0..=PI).contains(&l.frequency)) {
                    return Err(Error::validation(
                        format!("lines[{i}].frequency"),
                        format!("{} not in [0, π]", l.frequency),
                    ));
                }
                if !(l.power.is_finite() && l.power > 0.0) {
                    return Err(Error::validation(
                        format!("lines[{i}].power"),
                        format!("{} is not positive", l.power),
                    ));
                }
            }
            Ok(())
        }
        SymbolFamily::Piecewise {
            breakpoints,
            coefficients,
        } => {
            if breakpoints.len() < 2 {
                return Err(Error::validation("breakpoints", "need at least two breakpoints"));
            }
            if coefficients.len() != breakpoints.len() - 1 {
                return Err(Error::validation(
                    "pieces",
                    format!(
                        "{} coefficient lists for {} pieces",
                        coefficients.len(),
                        breakpoints.len() - 1
                    ),
                ));
            }
            if breakpoints[0] != 0.0 || (breakpoints[breakpoints.len() - 1] - PI).abs() > 1e-12 {
                return Err(Error::validation("breakpoints", "must start at 0 and end at π"));
            }
            if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation("breakpoints", "must be finite and strictly increasing"));
            }
            for (j, c) in coefficients.iter().enumerate() {
                if c.is_empty() || c.iter().any(|x| !x.is_finite()) {
                    return Err(Error::validation(
                        format!("pieces[{j}]"),
                        "coefficients must be a nonempty list of finite numbers",
                    ));
                }
            }
            for j in 0..coefficients.len() {
                let (a, b) = (breakpoints[j], breakpoints[j + 1]);
                for i in 0..=POSITIVITY_GRID_PER_PIECE {
                    let x = (b - a) * i as f64 / POSITIVITY_GRID_PER_PIECE as f64;
                    let v = coefficients[j].iter().rev().fold(0.0, |acc, c| acc * x + c);
                    if v < 0.0 {
                        return Err(Error::validation(
                            format!("pieces[{j}]"),
                            format!("symbol is negative ({v}) at θ = {}", a + x),
                        ));
                    }
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_density_matches_closed_form_extremes() {
        let s = Symbol::ar1(0.5).unwrap();
        assert!((s.density(0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((s.density(PI).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.ess_sup(), Some(3.0));
    }

    #[test]
    fn density_is_even_and_periodic() {
        let s = Symbol::ar1(0.3).unwrap();
        for &t in &[0.1, 1.0, 2.5, 3.0] {
            assert_eq!(s.density(t), s.density(-t));
            assert!((s.density(t).unwrap() - s.density(t + 2.0 * PI).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn bandlimited_indicator_and_breakpoint() {
        let s = Symbol::band_limited(PI / 4.0).unwrap();
        assert_eq!(s.density(0.5), Some(1.0));
        assert_eq!(s.density(-1.0), Some(0.0));
        assert_eq!(s.breakpoints(), vec![PI / 4.0]);
        assert!(Symbol::band_limited(PI).unwrap().breakpoints().is_empty());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Symbol::ar1(1.5).is_err());
        assert!(Symbol::ar1(-1.0).is_err());
        assert!(Symbol::band_limited(0.0).is_err());
        assert!(Symbol::band_limited(4.0).is_err());
        assert!(Symbol::lines(&[]).is_err());
        assert!(Symbol::lines(&[(4.0, 1.0)]).is_err());
        assert!(Symbol::lines(&[(1.0, 0.0)]).is_err());
        assert!(Symbol::new(SymbolFamily::White, -1.0).is_err());
        assert!(Symbol::new(SymbolFamily::White, f64::NAN).is_err());
    }

    #[test]
    fn piecewise_evaluation_and_positivity_check() {
        let fam = SymbolFamily::Piecewise {
            breakpoints: vec![0.0, 1.0, PI],
            coefficients: vec![vec![2.0, -1.0], vec![0.5]],
        };
        let s = Symbol::new(fam, 2.0).unwrap();
        assert!((s.density(0.5).unwrap() - 2.0 * 1.5).abs() < 1e-15);
        assert!((s.density(-2.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(s.breakpoints(), vec![1.0]);

        let negative = SymbolFamily::Piecewise {
            breakpoints: vec![0.0, PI],
            coefficients: vec![vec![1.0, -1.0]],
        };
        assert!(Symbol::new(negative, 1.0).is_err());

        let unordered = SymbolFamily::Piecewise {
            breakpoints: vec![0.0, 2.0, 1.0, PI],
            coefficients: vec![vec![1.0]; 3],
        };
        assert!(Symbol::new(unordered, 1.0).is_err());
    }

    #[test]
    fn lines_have_no_density() {
        let s = Symbol::lines(&[(0.5, 1.0)]).unwrap();
        assert!(s.density(0.5).is_none());
        assert!(s.is_line_spectral());
    }
}
