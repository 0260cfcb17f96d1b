//! Monte Carlo layer: Gaussian window paths y = U Λ^{1/2} g and sample
//! estimates of the approximation error and of the orthogonality between
//! ŷ = M y and y − ŷ.
//!
//! Generator contract (`GENERATOR_ID`): path `p` of a batch reads standard
//! normals from ChaCha20 keyed by the little-endian seed in the first eight
//! key bytes (the rest zero), stream number `p`, word position 0. Each
//! 64-bit output `x` becomes the uniform `((x >> 11) + 0.5) · 2⁻⁵³` and then
//! a normal through the AS241 inverse CDF. Draw order within a path is the
//! coordinate order of g.

use crate::error::{Error, Result};
use crate::spectrum::SpectrumResult;
use crate::toeplitz::TestFunction;
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const GENERATOR_ID: &str = "chacha20-stream-per-path/as241-v1";

/// Standard normal draws for one counter stream.
pub struct NormalStream {
    rng: ChaCha20Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        NormalStream { rng }
    }

    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }
}

/// Φ⁻¹(p) by Wichura's AS241 (PPND16), accurate to about 1e-16.
#[allow(clippy::excessive_precision)] // published coefficients, kept verbatim
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, k| acc * x + k)
    }

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// `count` sampled windows of length N, one path per row.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub generator_id: &'static str,
    paths: DMatrix<f64>,
}

impl PathBatch {
    /// count × N.
    pub fn paths(&self) -> &DMatrix<f64> {
        &self.paths
    }

    /// (1/count) Σ_p y_p y_pᵀ; the mean is known to be zero.
    pub fn second_moment(&self) -> DMatrix<f64> {
        self.paths.tr_mul(&self.paths) / self.count as f64
    }
}

/// Draws `count` Gaussian paths with covariance U Λ Uᵀ.
pub fn sample_paths(s: &SpectrumResult, count: usize, seed: u64) -> Result<PathBatch> {
    if count == 0 {
        return Err(Error::validation("count", "need at least one path"));
    }
    let n = s.source_n();
    // Eigenvalues at the roundoff level of the decomposition are zeroed so
    // that null directions of Σ carry no sampled energy.
    let floor = n as f64 * f64::EPSILON * s.largest();
    let root: Vec<f64> = s
        .eigenvalues()
        .iter()
        .map(|&l| if l <= floor { 0.0 } else { l.sqrt() })
        .collect();
    let factor = s.eigenvectors() * DMatrix::from_diagonal(&DVector::from_column_slice(&root));
    let mut g = DMatrix::zeros(count, n);
    for p in 0..count {
        let mut stream = NormalStream::new(seed, p as u64);
        for j in 0..n {
            g[(p, j)] = stream.next_normal();
        }
    }
    let paths = g * factor.transpose();
    Ok(PathBatch {
        n,
        count,
        seed,
        generator_id: GENERATOR_ID,
        paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// |estimate − target| ≤ k·std_error + floor.
    pub fn agrees_with(&self, target: f64, k: f64, floor: f64) -> bool {
        (self.estimate - target).abs() <= k * self.std_error + floor
    }
}

/// Sample mean and standard error of (ψᵀ(I − M) y)² over the batch.
pub fn mc_weak_error(batch: &PathBatch, m: &DMatrix<f64>, psi: &TestFunction) -> Result<McEstimate> {
    let n = batch.n;
    if m.shape() != (n, n) || psi.len() != n {
        return Err(Error::dimension(
            format!("{n}x{n} map and length-{n} test function"),
            format!("{:?} map, length-{} test function", m.shape(), psi.len()),
        ));
    }
    let a = DVector::from_column_slice(psi.coefficients());
    // ψᵀ(I − M) y = wᵀ y with w = (I − M)ᵀ ψ.
    let w = &a - m.tr_mul(&a);
    let proj = &batch.paths * w;
    let count = batch.count as f64;
    let mean = proj.iter().map(|v| v * v).sum::<f64>() / count;
    let var = if batch.count > 1 {
        proj.iter().map(|v| (v * v - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / count).sqrt(),
    })
}

/// Sample estimate of E[(y − My)(My)ᵀ].
#[derive(Debug, Clone)]
pub struct OrthogonalityResidual {
    pub matrix: DMatrix<f64>,
    pub max_abs: f64,
}

/// (1/count) Σ_p (y_p − M y_p)(M y_p)ᵀ, evaluated as (I − M) S Mᵀ with S
/// the batch second moment (an algebraic identity, not an approximation).
pub fn mc_orthogonality(batch: &PathBatch, m: &DMatrix<f64>) -> Result<OrthogonalityResidual> {
    let n = batch.n;
    if m.shape() != (n, n) {
        return Err(Error::dimension(format!("{n}x{n}"), format!("{:?}", m.shape())));
    }
    let e = DMatrix::<f64>::identity(n, n) - m;
    let matrix = e * batch.second_moment() * m.transpose();
    let max_abs = matrix.amax();
    Ok(OrthogonalityResidual { matrix, max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{covariance_from_symbol, QuadratureSpec, Symbol};
    use crate::pca::optimal_approximator;
    use crate::spectrum::{eigendecompose, EigenOptions};
    use crate::toeplitz::truncate;
    use std::f64::consts::PI;

    fn spectrum(sym: &Symbol, n: usize) -> SpectrumResult {
        let cov = covariance_from_symbol(sym, n - 1, &QuadratureSpec::default()).unwrap();
        eigendecompose(truncate(&cov, n).unwrap().dense(), &EigenOptions::default()).unwrap()
    }

    #[test]
    fn inverse_cdf_matches_reference_quantiles() {
        // Reference values from an independent implementation (SciPy ndtri).
        let refs = [
            (0.5, 0.0),
            (0.975, 1.959963984540054),
            (0.025, -1.9599639845400545),
            (0.3, -0.5244005127080409),
            (0.9, 1.2815515655446004),
            (1e-3, -3.090232306167813),
            (1e-10, -6.361340902404056),
            (1.0 - 1e-12, 7.0344869100478356),
            (0.42, -0.20189347914185088),
        ];
        for (p, z) in refs {
            let got = inverse_normal_cdf(p);
            assert!((got - z).abs() <= 1e-14 * z.abs().max(1.0), "p={p}: {got} vs {z}");
        }
    }

    #[test]
    fn uniforms_stay_strictly_inside_unit_interval() {
        let mut s = NormalStream::new(7, 3);
        for _ in 0..10_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = {
            let mut s = NormalStream::new(42, 0);
            (0..8).map(|_| s.next_normal()).collect()
        };
        let b: Vec<f64> = {
            let mut s = NormalStream::new(42, 0);
            (0..8).map(|_| s.next_normal()).collect()
        };
        let c: Vec<f64> = {
            let mut s = NormalStream::new(42, 1);
            (0..8).map(|_| s.next_normal()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_path_bit_identical() {
        let s = spectrum(&Symbol::ar1(0.5).unwrap(), 6);
        let a = sample_paths(&s, 1, 99).unwrap();
        let b = sample_paths(&s, 1, 99).unwrap();
        assert_eq!(a.paths(), b.paths());
        assert_eq!(a.generator_id, GENERATOR_ID);
        assert!(sample_paths(&s, 0, 1).is_err());
    }

    #[test]
    fn white_noise_variances() {
        let s = eigendecompose(&DMatrix::identity(4, 4), &EigenOptions::default()).unwrap();
        let count = 100_000;
        let batch = sample_paths(&s, count, 1).unwrap();
        let m2 = batch.second_moment();
        // Chi-square concentration: var of the sample variance is 2/count.
        let envelope = 5.0 * (2.0 / count as f64).sqrt();
        for i in 0..4 {
            assert!((m2[(i, i)] - 1.0).abs() <= envelope.min(0.05), "{}", m2[(i, i)]);
        }
    }

    #[test]
    fn empirical_covariance_within_envelope() {
        let s = spectrum(&Symbol::ar1(0.9).unwrap(), 8);
        let count = 20_000;
        let batch = sample_paths(&s, count, 5).unwrap();
        let dev = (batch.second_moment() - s.reconstruct()).amax();
        let envelope = 5.0 * (s.largest().powi(2) * 2.0 / count as f64).sqrt();
        assert!(dev <= envelope, "{dev} > {envelope}");
    }

    #[test]
    fn cosine_paths_satisfy_second_order_recursion() {
        let theta0 = 2.0 * PI / 8.0;
        let s = spectrum(&Symbol::lines(&[(theta0, 1.0)]).unwrap(), 16);
        let batch = sample_paths(&s, 5, 3).unwrap();
        for p in 0..5 {
            let y = batch.paths().row(p);
            for t in 1..15 {
                let r = y[t + 1] + y[t - 1] - 2.0 * theta0.cos() * y[t];
                assert!(r.abs() < 1e-8, "path {p} t {t}: {r}");
            }
        }
    }

    #[test]
    fn weak_error_examples() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let s = eigendecompose(&t, &EigenOptions::default()).unwrap();
        let batch = sample_paths(&s, 100_000, 11).unwrap();
        let e1 = TestFunction::unit(2, 0).unwrap();

        let id = DMatrix::<f64>::identity(2, 2);
        let exact = mc_weak_error(&batch, &id, &e1).unwrap();
        assert_eq!(exact.estimate, 0.0);
        assert_eq!(mc_orthogonality(&batch, &id).unwrap().max_abs, 0.0);

        let m = optimal_approximator(&s, 1).unwrap();
        let est = mc_weak_error(&batch, m.projector(), &e1).unwrap();
        assert!(est.agrees_with(0.25, 3.0, 0.0), "{est:?}");

        let zero = DMatrix::<f64>::zeros(2, 2);
        let var = mc_weak_error(&batch, &zero, &e1).unwrap();
        assert!(var.agrees_with(1.0, 3.0, 0.0), "{var:?}");

        let orth = mc_orthogonality(&batch, m.projector()).unwrap();
        assert!(orth.max_abs <= 5.0 * s.largest() / (100_000f64).sqrt());

        assert!(mc_weak_error(&batch, &DMatrix::zeros(3, 3), &e1).is_err());
    }

    #[test]
    fn approximated_paths_span_n_dimensions() {
        let s = spectrum(&Symbol::ar1(0.5).unwrap(), 10);
        let batch = sample_paths(&s, 200, 8).unwrap();
        let m = optimal_approximator(&s, 3).unwrap();
        let yhat = batch.paths() * m.projector().transpose();
        let mut sv: Vec<f64> = yhat.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!(sv[3] <= 1e-8 * sv[0], "{sv:?}");
    }
}
