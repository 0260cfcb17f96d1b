//! Weak convergence of the rank-n approximations.
//!
//! For a window of length N and a test sequence ψ supported on it, the gap
//! ψᵀ(Σ_N − Σ̂ⁿ_N)ψ = E[ψᵀ(y − ŷⁿ)]² is nonnegative, nonincreasing in n and
//! zero at n = N. The same quadratic forms can be read in the frequency
//! domain as ∫ |ψ̂|² dμ / 2π against the spectral measure.

use crate::error::{Error, Result};
use crate::model::quadrature::{integrate_many, panel_edges, GaussLegendre};
use crate::model::{CovarianceSequence, QuadratureSpec, Symbol};
use crate::pca::optimal_approximator;
use crate::realize::{line_spectrum, stationary_extension, toeplitz_defect, LineSpectrum};
use crate::sample::NormalStream;
use crate::spectrum::{eigendecompose, EigenOptions, SpectrumResult};
use crate::toeplitz::{truncate, TestFunction};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Relative tolerance for the gap invariants and the error-form cross-check.
pub const GAP_TOLERANCE: f64 = 1e-9;

/// Stream offset keeping ψ-bank draws apart from path streams.
const BANK_STREAM_BASE: u64 = 1 << 40;

/// Number of seeded random directions in [`psi_bank`].
pub const RANDOM_PSI: usize = 14;

/// Fixed probes plus `RANDOM_PSI` seeded random unit vectors, all of
/// length `n` and supported at the origin.
pub fn psi_bank(n: usize, seed: u64) -> Result<Vec<(String, TestFunction)>> {
    if n == 0 {
        return Err(Error::validation("N", "test functions need length >= 1"));
    }
    let unit_scaled = |v: Vec<f64>| -> Vec<f64> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    };
    let nf = n as f64;
    let centre = 0.5 * (nf - 1.0);
    let width = (nf / 6.0).max(0.5);
    let mut bank = vec![
        ("e_first".to_string(), TestFunction::unit(n, 0)?),
        ("e_mid".to_string(), TestFunction::unit(n, n / 2)?),
        ("e_last".to_string(), TestFunction::unit(n, n - 1)?),
        ("boxcar".to_string(), TestFunction::at_origin(unit_scaled(vec![1.0; n]))?),
        (
            "alternating".to_string(),
            TestFunction::at_origin(unit_scaled(
                (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            ))?,
        ),
        (
            "gaussian".to_string(),
            TestFunction::at_origin(unit_scaled(
                (0..n)
                    .map(|k| (-0.5 * ((k as f64 - centre) / width).powi(2)).exp())
                    .collect(),
            ))?,
        ),
    ];
    for r in 0..RANDOM_PSI {
        let mut stream = NormalStream::new(seed, BANK_STREAM_BASE + r as u64);
        let v: Vec<f64> = (0..n).map(|_| stream.next_normal()).collect();
        bank.push((format!("random{r:02}"), TestFunction::at_origin(unit_scaled(v))?));
    }
    Ok(bank)
}

/// One window Σ_N with its eigendecomposition, shared by every (n, ψ).
#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    t: DMatrix<f64>,
    spectrum: SpectrumResult,
    origin: Option<Symbol>,
}

impl WindowAnalysis {
    pub fn new(cov: &CovarianceSequence, n: usize, opts: &EigenOptions) -> Result<Self> {
        let t = truncate(cov, n)?.dense().clone();
        let spectrum = eigendecompose(&t, opts)?;
        Ok(WindowAnalysis {
            t,
            spectrum,
            origin: cov.origin().cloned(),
        })
    }

    pub fn from_parts(t: DMatrix<f64>, spectrum: SpectrumResult) -> Result<Self> {
        if t.nrows() != spectrum.source_n() {
            return Err(Error::dimension(spectrum.source_n(), t.nrows()));
        }
        Ok(WindowAnalysis {
            t,
            spectrum,
            origin: None,
        })
    }

    pub fn window(&self) -> usize {
        self.t.nrows()
    }

    pub fn toeplitz(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn spectrum(&self) -> &SpectrumResult {
        &self.spectrum
    }

    fn coords(&self, psi: &TestFunction) -> Result<DVector<f64>> {
        let n = self.window();
        if psi.len() != n {
            return Err(Error::dimension(format!("test function of length {n}"), psi.len()));
        }
        Ok(DVector::from_column_slice(psi.coefficients()))
    }

    /// ψᵀ Σ_N ψ.
    pub fn sigma_qf(&self, psi: &TestFunction) -> Result<f64> {
        let a = self.coords(psi)?;
        Ok(a.dot(&(&self.t * &a)))
    }

    /// ψᵀ Σ̂ⁿ_N ψ for every n = 0..=N (index n), via eigen-coordinates.
    fn sigmahat_qfs(&self, a: &DVector<f64>) -> Vec<f64> {
        let c = self.spectrum.eigenvectors().tr_mul(a);
        let mut out = Vec::with_capacity(c.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for (l, ck) in self.spectrum.eigenvalues().iter().zip(c.iter()) {
            acc += l * ck * ck;
            out.push(acc);
        }
        out
    }

    /// Gap ψᵀ(Σ_N − Σ̂ⁿ_N)ψ, cross-checked against the error form
    /// wᵀ Σ_N w with w = (I − M)ᵀψ.
    pub fn weak_gap(&self, n: usize, psi: &TestFunction) -> Result<f64> {
        Ok(self.gap_entries(psi, n..=n)?[0].1)
    }

    fn gap_entries(&self, psi: &TestFunction, ns: std::ops::RangeInclusive<usize>) -> Result<Vec<(usize, f64)>> {
        let big_n = self.window();
        if *ns.start() == 0 || *ns.end() > big_n {
            return Err(Error::OutOfRange {
                what: "rank n",
                value: if *ns.start() == 0 { 0 } else { *ns.end() },
                range: format!("1..={big_n}"),
            });
        }
        let a = self.coords(psi)?;
        let total = a.dot(&(&self.t * &a));
        let hat = self.sigmahat_qfs(&a);
        let u = self.spectrum.eigenvectors();
        let c = u.tr_mul(&a);
        let scale = total.abs().max(psi.norm_sq() * self.spectrum.largest()).max(f64::MIN_POSITIVE);
        let mut out = Vec::new();
        for n in ns {
            let gap = total - hat[n];
            // w = Σ_{k>n} c_k u_k = (I − UₙUₙᵀ)ψ.
            let w = u.columns(n, big_n - n) * c.rows(n, big_n - n);
            let error_form = w.dot(&(&self.t * &w));
            if (gap - error_form).abs() > GAP_TOLERANCE * scale {
                return Err(Error::Consistency {
                    what: format!("weak gap at n={n} disagrees with its error form"),
                    lhs: gap,
                    rhs: error_form,
                });
            }
            out.push((n, gap));
        }
        Ok(out)
    }

    /// The full curve n = 1..N, with invariants verified.
    pub fn sweep(&self, psi: &TestFunction) -> Result<ConvergenceCurve> {
        let entries = self.gap_entries(psi, 1..=self.window())?;
        let curve = ConvergenceCurve {
            window: self.window(),
            psi: psi.clone(),
            psi_sigma_psi: self.sigma_qf(psi)?,
            roundoff: self.window() as f64 * f64::EPSILON * psi.norm_sq() * self.spectrum.largest(),
            entries,
        };
        curve.check()?;
        Ok(curve)
    }

    /// Four-way time/frequency comparison at rank n for each ψ.
    ///
    /// The φ side uses `symbol`, falling back to the covariance origin;
    /// when neither exists the frequency-domain Σ values are absent. The
    /// φₙ side needs a realization, which exists only for n < N.
    pub fn reports(
        &self,
        n: usize,
        psis: &[&TestFunction],
        symbol: Option<&Symbol>,
        quad: &QuadratureSpec,
    ) -> Result<Vec<WconvReport>> {
        let approx = optimal_approximator(&self.spectrum, n)?;
        let defect = toeplitz_defect(&approx);
        let (lines, realization_note) = match stationary_extension(&approx) {
            Ok(r) => (Some(line_spectrum(&r)), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let symbol = symbol.or(self.origin.as_ref());
        let mut out = Vec::with_capacity(psis.len());
        for psi in psis {
            let sigma_qf = self.sigma_qf(psi)?;
            let sigmahat_qf = sigma_qf - self.weak_gap(n, psi)?;
            let sigma_qf_freq = match symbol {
                Some(s) => Some(spectral_quadratic_form(SpectralMeasure::Symbol(s), psi, quad)?),
                None => None,
            };
            let sigmahat_qf_freq = lines
                .as_ref()
                .map(|l| spectral_quadratic_form(SpectralMeasure::Lines(l), psi, quad))
                .transpose()?;
            out.push(WconvReport {
                window: self.window(),
                rank: n,
                sigma_qf,
                sigma_qf_freq,
                sigmahat_qf,
                sigmahat_qf_freq,
                gap: sigma_qf - sigmahat_qf,
                toeplitz_defect: defect,
                realization_note: realization_note.clone(),
            });
        }
        Ok(out)
    }
}

/// Gaps for n = 1..N at a fixed ψ.
#[derive(Debug, Clone)]
pub struct ConvergenceCurve {
    pub window: usize,
    pub psi: TestFunction,
    /// ψᵀ Σ_N ψ, the gap at n = 0.
    pub psi_sigma_psi: f64,
    /// Roundoff level N·ε·‖ψ‖²·λ₁ of the quadratic forms; tolerances never
    /// drop below it, which matters for ψ (near) the null space of Σ_N.
    pub roundoff: f64,
    pub entries: Vec<(usize, f64)>,
}

impl ConvergenceCurve {
    /// Nonnegativity, monotonicity and vanishing at n = N, all relative to
    /// ψᵀΣ_Nψ with tolerance [`GAP_TOLERANCE`].
    pub fn check(&self) -> Result<()> {
        let tol = (GAP_TOLERANCE * self.psi_sigma_psi.abs()).max(self.roundoff);
        let mut prev = self.psi_sigma_psi;
        for &(n, gap) in &self.entries {
            if gap < -tol {
                return Err(Error::Consistency {
                    what: format!("negative gap at n={n}"),
                    lhs: gap,
                    rhs: -tol,
                });
            }
            if gap > prev + tol {
                return Err(Error::Consistency {
                    what: format!("gap increased at n={n}"),
                    lhs: gap,
                    rhs: prev,
                });
            }
            prev = gap;
        }
        if let Some(&(n, last)) = self.entries.last() {
            if n == self.window && last > tol {
                return Err(Error::Consistency {
                    what: format!("gap at n=N={n} does not vanish"),
                    lhs: last,
                    rhs: tol,
                });
            }
        }
        Ok(())
    }

    pub fn gap(&self, n: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == n).map(|e| e.1)
    }
}

/// ψᵀ(Σ_N − Σ̂ⁿ_N)ψ for a single (n, ψ).
pub fn weak_gap(cov: &CovarianceSequence, window: usize, n: usize, psi: &TestFunction) -> Result<f64> {
    WindowAnalysis::new(cov, window, &EigenOptions::default())?.weak_gap(n, psi)
}

/// Curve n = 1..N from one eigendecomposition.
pub fn convergence_sweep(cov: &CovarianceSequence, window: usize, psi: &TestFunction) -> Result<ConvergenceCurve> {
    WindowAnalysis::new(cov, window, &EigenOptions::default())?.sweep(psi)
}

/// Spectral measure against which |ψ̂|² is integrated.
#[derive(Debug, Clone, Copy)]
pub enum SpectralMeasure<'a> {
    Symbol(&'a Symbol),
    Lines(&'a LineSpectrum),
}

/// ∫ |ψ̂(e^{iω})|² dμ(ω) / 2π.
///
/// Line measures are exact finite sums. Densities are integrated by
/// composite Gauss–Legendre on `[0, π]` with the symbol breakpoints on
/// panel edges, and must agree with the panel-doubled rule to
/// `quad.tolerance · ‖ψ‖² σ(0)`.
pub fn spectral_quadratic_form(mu: SpectralMeasure<'_>, psi: &TestFunction, quad: &QuadratureSpec) -> Result<f64> {
    let symbol = match mu {
        SpectralMeasure::Lines(lines) => return Ok(lines.quadratic_form(psi)),
        SpectralMeasure::Symbol(s) => s,
    };
    if let Some(lines) = symbol.scaled_lines() {
        return Ok(LineSpectrum::new(lines).quadratic_form(psi));
    }
    quad.validate()?;
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let panels = quad.panels_for(psi.len());
    let integrate = |panels: usize| {
        let edges = panel_edges(panels, &symbol.breakpoints());
        integrate_many(&rule, &edges, 2, |theta, w, acc| {
            let f = symbol.density(theta).unwrap_or(0.0) * w / PI;
            acc[0] += f * psi.transform_power(theta);
            acc[1] += f;
        })
    };
    let coarse = integrate(panels);
    let fine = integrate(2 * panels);
    let residual = (coarse[0] - fine[0]).abs();
    let tolerance = quad.tolerance * psi.norm_sq() * fine[1].abs().max(f64::MIN_POSITIVE);
    if residual > tolerance {
        return Err(Error::Accuracy { residual, tolerance });
    }
    Ok(fine[0])
}

/// Time- and frequency-domain quadratic forms at one (N, n, ψ).
#[derive(Debug, Clone, PartialEq)]
pub struct WconvReport {
    pub window: usize,
    pub rank: usize,
    /// ψᵀ Σ_N ψ
    pub sigma_qf: f64,
    /// ∫ |ψ̂|² φ / 2π
    pub sigma_qf_freq: Option<f64>,
    /// ψᵀ Σ̂ⁿ_N ψ
    pub sigmahat_qf: f64,
    /// ∫ |ψ̂|² dμₙ / 2π over the realization's line spectrum.
    pub sigmahat_qf_freq: Option<f64>,
    pub gap: f64,
    /// Relative Toeplitz defect of Σ̂ⁿ_N; the φₙ-side residual absorbs it.
    pub toeplitz_defect: f64,
    /// Why the realization is missing, if it is.
    pub realization_note: Option<String>,
}

impl WconvReport {
    /// |ψᵀΣψ − ∫|ψ̂|²φ/2π| relative to the larger of the two.
    pub fn sigma_residual(&self) -> Option<f64> {
        self.sigma_qf_freq.map(|f| relative(self.sigma_qf, f))
    }

    /// |ψᵀΣ̂ⁿψ − ∫|ψ̂|²dμₙ/2π| relative to the larger of the two.
    pub fn sigmahat_residual(&self) -> Option<f64> {
        self.sigmahat_qf_freq.map(|f| relative(self.sigmahat_qf, f))
    }
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Single-ψ report; see [`WindowAnalysis::reports`].
pub fn wconv_report(
    cov: &CovarianceSequence,
    symbol: Option<&Symbol>,
    window: usize,
    n: usize,
    psi: &TestFunction,
    quad: &QuadratureSpec,
) -> Result<WconvReport> {
    let wa = WindowAnalysis::new(cov, window, &EigenOptions::default())?;
    Ok(wa.reports(n, &[psi], symbol, quad)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::covariance_from_symbol;

    fn cov(sym: &Symbol, n: usize) -> CovarianceSequence {
        covariance_from_symbol(sym, n - 1, &QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn two_by_two_gaps() {
        let c = CovarianceSequence::new(vec![1.0, 0.5]).unwrap();
        let e1 = TestFunction::at_origin(vec![1.0, 0.0]).unwrap();
        let ones = TestFunction::at_origin(vec![1.0, 1.0]).unwrap();
        assert!((weak_gap(&c, 2, 1, &e1).unwrap() - 0.25).abs() < 1e-15);
        assert!(weak_gap(&c, 2, 1, &ones).unwrap().abs() < 1e-14);
        assert!(weak_gap(&c, 2, 2, &e1).unwrap().abs() < 1e-15);
        assert!(weak_gap(&c, 2, 0, &e1).is_err());
        assert!(weak_gap(&c, 2, 3, &e1).is_err());
        assert!(weak_gap(&c, 2, 1, &TestFunction::unit(3, 0).unwrap()).is_err());
    }

    #[test]
    fn bank_is_twenty_unit_vectors_and_seeded() {
        let a = psi_bank(16, 3).unwrap();
        let b = psi_bank(16, 3).unwrap();
        let c = psi_bank(16, 4).unwrap();
        assert_eq!(a.len(), 20);
        for ((ida, pa), (idb, pb)) in a.iter().zip(&b) {
            assert_eq!(ida, idb);
            assert_eq!(pa, pb);
            assert!((pa.norm_sq() - 1.0).abs() < 1e-14);
        }
        assert_ne!(a[10].1, c[10].1);
        assert_eq!(a[0].1, c[0].1);
        assert_eq!(psi_bank(1, 0).unwrap().len(), 20);
    }

    #[test]
    fn white_noise_curve_runs_from_norm_to_zero() {
        let c = cov(&Symbol::white(), 8);
        for (_, psi) in psi_bank(8, 1).unwrap() {
            let curve = convergence_sweep(&c, 8, &psi).unwrap();
            assert!((curve.psi_sigma_psi - 1.0).abs() < 1e-14);
            assert!(curve.gap(8).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_gap_vanishes_from_rank_two() {
        let c = cov(&Symbol::lines(&[(2.0 * PI / 8.0, 1.0)]).unwrap(), 8);
        for (id, psi) in psi_bank(8, 2).unwrap() {
            let curve = convergence_sweep(&c, 8, &psi).unwrap();
            for n in 2..=8 {
                assert!(curve.gap(n).unwrap() <= 1e-9, "{id} n={n}");
            }
        }
    }

    #[test]
    fn band_limited_plunge_location() {
        let c = cov(&Symbol::band_limited(PI / 4.0).unwrap(), 64);
        let curve = convergence_sweep(&c, 64, &TestFunction::unit(64, 0).unwrap()).unwrap();
        let threshold = 0.01 * c.variance();
        let first = curve.entries.iter().find(|e| e.1 < threshold).unwrap().0;
        assert!((16..=20).contains(&first), "{first}");
        assert!(curve.entries.iter().filter(|e| e.0 >= first).all(|e| e.1 < threshold));
    }

    #[test]
    fn curve_check_rejects_bad_curves() {
        let psi = TestFunction::unit(2, 0).unwrap();
        let rising = ConvergenceCurve {
            window: 2,
            psi: psi.clone(),
            psi_sigma_psi: 1.0,
            roundoff: 0.0,
            entries: vec![(1, 0.5), (2, 0.6)],
        };
        assert!(rising.check().is_err());
        let negative = ConvergenceCurve {
            entries: vec![(1, -0.1), (2, 0.0)],
            ..rising.clone()
        };
        assert!(negative.check().is_err());
        let stuck = ConvergenceCurve {
            entries: vec![(1, 0.5), (2, 0.5)],
            ..rising
        };
        assert!(stuck.check().is_err());
    }

    #[test]
    fn spectral_forms_trivial_cases() {
        let q = QuadratureSpec::default();
        let delta = TestFunction::unit(5, 0).unwrap();
        let ar = Symbol::ar1(0.5).unwrap();
        let v = spectral_quadratic_form(SpectralMeasure::Symbol(&ar), &delta, &q).unwrap();
        assert!((v - 1.0).abs() < 1e-13);

        let psi = TestFunction::at_origin(vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        let w = spectral_quadratic_form(SpectralMeasure::Symbol(&Symbol::white()), &psi, &q).unwrap();
        assert!((w - psi.norm_sq()).abs() < 1e-13 * psi.norm_sq());

        let line = Symbol::lines(&[(0.7, 1.0)]).unwrap();
        let l = spectral_quadratic_form(SpectralMeasure::Symbol(&line), &delta, &q).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_form_accuracy_error() {
        let coarse = QuadratureSpec {
            nodes_per_panel: 2,
            panels: 8,
            tolerance: 1e-14,
        };
        let psi = TestFunction::at_origin(vec![1.0; 8]).unwrap();
        let r = spectral_quadratic_form(SpectralMeasure::Symbol(&Symbol::ar1(0.95).unwrap()), &psi, &coarse);
        assert!(matches!(r, Err(Error::Accuracy { .. })));
    }

    #[test]
    fn cosine_report_four_values_agree() {
        let sym = Symbol::lines(&[(2.0 * PI / 8.0, 1.0)]).unwrap();
        let c = cov(&sym, 8);
        for (id, psi) in psi_bank(8, 5).unwrap() {
            let r = wconv_report(&c, None, 8, 2, &psi, &QuadratureSpec::default()).unwrap();
            let vals = [
                r.sigma_qf,
                r.sigma_qf_freq.unwrap(),
                r.sigmahat_qf,
                r.sigmahat_qf_freq.unwrap(),
            ];
            for v in vals {
                assert!((v - vals[0]).abs() <= 1e-6, "{id}: {vals:?}");
            }
        }
    }

    #[test]
    fn white_full_rank_report() {
        let c = cov(&Symbol::white(), 8);
        let psi = TestFunction::at_origin(vec![0.5, -0.5, 0.5, -0.5, 0.1, 0.2, 0.3, 0.4]).unwrap();
        let r = wconv_report(&c, None, 8, 8, &psi, &QuadratureSpec::default()).unwrap();
        assert!(r.sigmahat_qf_freq.is_none());
        assert!(r.realization_note.is_some());
        assert!((r.sigma_qf_freq.unwrap() - r.sigmahat_qf).abs() <= 1e-8);
    }

    #[test]
    fn ar1_parseval_along_sweep() {
        let sym = Symbol::ar1(0.5).unwrap();
        let c = cov(&sym, 32);
        let wa = WindowAnalysis::new(&c, 32, &EigenOptions::default()).unwrap();
        let e1 = TestFunction::unit(32, 0).unwrap();
        let mut prev = f64::INFINITY;
        for n in 1..=32 {
            let r = wa.reports(n, &[&e1], Some(&sym), &QuadratureSpec::default()).unwrap().remove(0);
            assert!((r.sigma_qf - r.sigma_qf_freq.unwrap()).abs() <= 1e-6);
            assert!(r.gap <= prev + 1e-12);
            prev = r.gap;
        }
    }

    #[test]
    fn frequency_form_matches_direct_integral() {
        // Independent oracle: plain midpoint rule on a fine grid over
        // (-π, π) with the closed-form AR(1) density.
        let rho: f64 = 0.3;
        let psi = TestFunction::at_origin(vec![1.0, -2.0, 0.5]).unwrap();
        let m = 200_000;
        let h = 2.0 * PI / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let w = -PI + (i as f64 + 0.5) * h;
            let phi = (1.0 - rho * rho) / (1.0 - 2.0 * rho * w.cos() + rho * rho);
            acc += phi * psi.transform_power(w);
        }
        let oracle = acc * h / (2.0 * PI);
        let sym = Symbol::ar1(rho).unwrap();
        let v = spectral_quadratic_form(SpectralMeasure::Symbol(&sym), &psi, &QuadratureSpec::default()).unwrap();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }
}
