use crate::output::{num, opt_num, Outputs};
use crate::{ApproxArgs, CommonArgs, ConvergeArgs, ReproArgs, SampleArgs, SourceArgs, SpectrumArgs};
use anyhow::{Context, Result};
use pdapprox::converge::{psi_bank, WindowAnalysis};
use pdapprox::model::io::{load_covariance, load_symbol, symbol_to_json, Format};
use pdapprox::model::{covariance_from_symbol_uncapped, CovarianceSequence, QuadratureSpec, Symbol, TAU_MAX_CAP};
use pdapprox::pca::{optimal_approximator, projection_certificate};
use pdapprox::realize::{line_spectrum, stationary_extension, toeplitz_defect};
use pdapprox::repro::{self, ReproConfig};
use pdapprox::sample::{mc_orthogonality, mc_weak_error, sample_paths};
use pdapprox::spectrum::{effective_rank, eigendecompose, weyl_tracks, EigenOptions};
use pdapprox::toeplitz::{frobenius_distance, truncate, write_dense_csv, TestFunction};
use serde_json::{json, Value};
use std::fmt;

/// Invalid command-line configuration (exit status 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A verified property did not hold (exit status 1).
#[derive(Debug)]
pub struct AssertionFailed(pub String);

impl fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AssertionFailed {}

fn config(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    use pdapprox::Error as E;
    if e.downcast_ref::<AssertionFailed>().is_some() {
        return 1;
    }
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<E>() {
        Some(E::Validation { .. } | E::Parse { .. } | E::OutOfRange { .. } | E::InsufficientLags { .. } | E::Dimension { .. }) => 2,
        _ => 1,
    }
}

struct Source {
    cov: CovarianceSequence,
    symbol: Option<Symbol>,
    label: String,
}

impl Source {
    fn describe(&self) -> Value {
        match &self.symbol {
            Some(s) => serde_json::from_str(&symbol_to_json(s)).unwrap_or(Value::Null),
            None => json!({ "covariance_file": self.label }),
        }
    }
}

fn quad_of(src: &SourceArgs) -> QuadratureSpec {
    QuadratureSpec {
        nodes_per_panel: src.quad_nodes,
        panels: src.quad_panels,
        ..QuadratureSpec::default()
    }
}

fn symbol_of(src: &SourceArgs) -> Result<Option<Symbol>> {
    if let Some(spec) = &src.symbol {
        return crate::symbol_arg::parse(spec)
            .map(Some)
            .map_err(|e| config(format!("{e:#}")));
    }
    if let Some(path) = &src.symbol_file {
        let sym = load_symbol(path, Format::Json).with_context(|| format!("--symbol-file {}", path.display()))?;
        return Ok(Some(sym));
    }
    Ok(None)
}

fn covariance_for(sym: &Symbol, src: &SourceArgs, tau_max: usize) -> Result<CovarianceSequence> {
    if tau_max > TAU_MAX_CAP && !src.lift_tau_cap {
        return Err(config(format!(
            "--N: needs {tau_max} lags, above the cap of {TAU_MAX_CAP}; pass --lift-tau-cap to allow it"
        )));
    }
    Ok(covariance_from_symbol_uncapped(sym, tau_max, &quad_of(src))?)
}

/// Loads the process with at least `tau_max` lags.
fn load(src: &SourceArgs, tau_max: usize) -> Result<Source> {
    if let Some(sym) = symbol_of(src)? {
        let cov = covariance_for(&sym, src, tau_max)?;
        return Ok(Source {
            cov,
            label: sym.label(),
            symbol: Some(sym),
        });
    }
    let path = src.cov.as_ref().ok_or_else(|| config("one of --symbol, --symbol-file, --cov is required"))?;
    let format = Format::from_path(path)
        .ok_or_else(|| config(format!("--cov: {} must end in .csv or .json", path.display())))?;
    let cov = load_covariance(path, format).with_context(|| format!("--cov {}", path.display()))?;
    if cov.tau_max() < tau_max {
        return Err(config(format!(
            "--cov: {} has lags up to {}, but {} are needed",
            path.display(),
            cov.tau_max(),
            tau_max
        )));
    }
    Ok(Source {
        cov,
        symbol: None,
        label: path.display().to_string(),
    })
}

fn check_window(big_n: usize) -> Result<()> {
    if big_n == 0 {
        return Err(config("--N: must be at least 1"));
    }
    Ok(())
}

fn check_rank(n: usize, big_n: usize) -> Result<()> {
    if n == 0 || n > big_n {
        return Err(config(format!("--n: {n} not in 1..={big_n} (--N)")));
    }
    Ok(())
}

fn outputs(common: &CommonArgs) -> Result<Outputs> {
    Outputs::create(&common.out, !common.no_timestamp)
}

pub fn spectrum(a: &SpectrumArgs) -> Result<()> {
    check_window(a.big_n)?;
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(config(format!("--threshold: {} not in (0, 1)", a.threshold)));
    }
    let max_n = a.ns.iter().copied().chain([a.big_n]).max().unwrap_or(a.big_n);
    let src = load(&a.source, max_n - 1)?;
    let opts = EigenOptions::default();
    let t = truncate(&src.cov, a.big_n)?;
    let s = eigendecompose(t.dense(), &opts)?;
    let rank = effective_rank(&s, a.threshold)?;
    let (ortho, recon) = s.residuals(t.dense());
    let out = outputs(&a.common)?;

    out.csv(
        "eigenvalues.csv",
        &["k", "lambda"],
        s.eigenvalues().iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), num(*l)]),
    )?;

    let mut tracks_json = Vec::new();
    if !a.ns.is_empty() {
        let mut ns = a.ns.clone();
        ns.sort_unstable();
        ns.dedup();
        if ns[0] == 0 {
            return Err(config("--Ns: window lengths must be positive"));
        }
        let k = a.k.min(ns[0]);
        let tracks = weyl_tracks(&src.cov, &ns, k, &opts)?;
        let mut rows = Vec::new();
        for (i, &n) in ns.iter().enumerate() {
            for tr in &tracks {
                rows.push(vec![n.to_string(), tr.k.to_string(), num(tr.values[i])]);
            }
        }
        out.csv("weyl.csv", &["N", "k", "lambda"], rows)?;
        for tr in &tracks {
            tracks_json.push(json!({
                "k": tr.k,
                "limit_estimate": tr.limit_estimate,
                "max_violation": tr.max_violation,
                "monotone": tr.is_monotone(1e-10),
            }));
        }
    }

    out.json(
        "spectrum.json",
        "pdapprox.spectrum/1",
        json!({
            "source": src.describe(),
            "N": a.big_n,
            "effective_rank": rank,
            "threshold": a.threshold,
            "largest": s.largest(),
            "trace": s.trace(),
            "sweeps": s.sweeps(),
            "off_norm": s.off_norm(),
            "orthogonality_residual": ortho,
            "reconstruction_residual": recon,
            "sup_symbol": src.symbol.as_ref().and_then(Symbol::ess_sup),
            "weyl": tracks_json,
        }),
    )?;
    println!("effective rank (threshold {}): {rank}", a.threshold);
    Ok(())
}

pub fn approx(a: &ApproxArgs) -> Result<()> {
    check_window(a.big_n)?;
    check_rank(a.n, a.big_n)?;
    let src = load(&a.source, a.big_n - 1)?;
    let t = truncate(&src.cov, a.big_n)?;
    let s = eigendecompose(t.dense(), &EigenOptions::default())?;
    let approx = optimal_approximator(&s, a.n)?;
    let cert = projection_certificate(&approx, &s)?;
    let gap = frobenius_distance(t.dense(), approx.sigma_hat())?;
    let out = outputs(&a.common)?;
    if a.dump_sigma_hat {
        let f = std::fs::File::create(out.path("sigma_hat.csv"))?;
        write_dense_csv(std::io::BufWriter::new(f), approx.sigma_hat())?;
    }
    out.json(
        "approx.json",
        "pdapprox.approx/1",
        json!({
            "source": src.describe(),
            "N": a.big_n,
            "n": a.n,
            "error": approx.error(),
            "trace": t.trace(),
            "frobenius_gap": gap,
            "kept_eigenvalues": approx.kept_eigenvalues(),
            "degenerate_cut": approx.degenerate_cut(),
            "certificate": {
                "symmetry": cert.symmetry,
                "idempotency": cert.idempotency,
                "orthogonality": cert.orthogonality,
                "trace": cert.trace,
                "holds": cert.holds(1e-9),
            },
        }),
    )?;
    println!("error = {}", num(approx.error()));
    Ok(())
}

pub fn realize(a: &ApproxArgs) -> Result<()> {
    check_window(a.big_n)?;
    check_rank(a.n, a.big_n)?;
    let src = load(&a.source, a.big_n - 1)?;
    let horizon = 4 * a.big_n;
    let reference: Vec<f64> = match &src.symbol {
        Some(sym) => covariance_for(sym, &a.source, horizon)?.values().to_vec(),
        None => src.cov.values().to_vec(),
    };
    let t = truncate(&src.cov, a.big_n)?;
    let s = eigendecompose(t.dense(), &EigenOptions::default())?;
    let approx = optimal_approximator(&s, a.n)?;
    let r = stationary_extension(&approx)?;
    let lines = line_spectrum(&r);
    let d = r.diagnostics();
    let hat = r.covariances(horizon);
    let out = outputs(&a.common)?;
    let sigma_at = |tau: usize| reference.get(tau).copied();
    out.csv(
        "covariance.csv",
        &["tau", "sigma_hat", "sigma"],
        hat.iter()
            .enumerate()
            .map(|(tau, v)| vec![tau.to_string(), num(*v), opt_num(sigma_at(tau))]),
    )?;
    let max_dev = hat
        .iter()
        .enumerate()
        .filter_map(|(tau, v)| sigma_at(tau).map(|s| (v - s).abs()))
        .fold(0.0, f64::max);
    out.json(
        "realize.json",
        "pdapprox.realize/1",
        json!({
            "source": src.describe(),
            "N": a.big_n,
            "n": a.n,
            "frequencies": lines.lines().iter().map(|l| l.frequency).collect::<Vec<_>>(),
            "powers": lines.lines().iter().map(|l| l.power).collect::<Vec<_>>(),
            "orthogonality_residual": d.orthogonality_residual,
            "observability_sv": d.observability_sv,
            "stationarity_residual": d.stationarity_residual,
            "shift_residual": d.shift_residual,
            "polar_correction": d.polar_correction,
            "toeplitz_defect": toeplitz_defect(&approx),
            "max_covariance_deviation": max_dev,
        }),
    )?;
    for l in lines.lines() {
        println!("line theta={} power={}", num(l.frequency), num(l.power));
    }
    Ok(())
}

fn select_bank(big_n: usize, seed: u64, ids: &[String]) -> Result<Vec<(String, TestFunction)>> {
    let bank = psi_bank(big_n, seed)?;
    if ids.is_empty() {
        return Ok(bank);
    }
    let mut chosen = Vec::new();
    for id in ids {
        match bank.iter().find(|(b, _)| b == id) {
            Some(entry) => chosen.push(entry.clone()),
            None => {
                let known: Vec<&str> = bank.iter().map(|(b, _)| b.as_str()).collect();
                return Err(config(format!("--psi: unknown id {id:?} (known: {})", known.join(", "))));
            }
        }
    }
    Ok(chosen)
}

pub fn converge(a: &ConvergeArgs) -> Result<()> {
    check_window(a.big_n)?;
    let ranks: Vec<usize> = match (a.n, a.n_sweep) {
        (Some(_), true) => return Err(config("--n and --n-sweep are mutually exclusive")),
        (Some(n), false) => {
            check_rank(n, a.big_n)?;
            vec![n]
        }
        (None, _) => (1..=a.big_n).collect(),
    };
    let src = load(&a.source, a.big_n - 1)?;
    let quad = quad_of(&a.source);
    let wa = WindowAnalysis::new(&src.cov, a.big_n, &EigenOptions::default())?;
    let bank = select_bank(a.big_n, a.seed, &a.psi)?;
    let psis: Vec<&TestFunction> = bank.iter().map(|(_, p)| p).collect();

    let mut rows = Vec::new();
    let mut max_sigma_res: f64 = 0.0;
    let mut max_hat_res: f64 = 0.0;
    let mut notes = Vec::new();
    for &n in &ranks {
        let reports = wa.reports(n, &psis, src.symbol.as_ref(), &quad)?;
        for ((id, _), r) in bank.iter().zip(&reports) {
            max_sigma_res = max_sigma_res.max(r.sigma_residual().unwrap_or(0.0));
            max_hat_res = max_hat_res.max(r.sigmahat_residual().unwrap_or(0.0));
            rows.push(vec![
                n.to_string(),
                id.clone(),
                num(r.gap),
                num(r.sigma_qf),
                opt_num(r.sigma_qf_freq),
                num(r.sigmahat_qf),
                opt_num(r.sigmahat_qf_freq),
            ]);
        }
        if let Some(note) = reports.first().and_then(|r| r.realization_note.clone()) {
            notes.push(json!({ "n": n, "realization": note }));
        }
    }
    let out = outputs(&a.common)?;
    out.csv(
        "converge.csv",
        &["n", "psi_id", "gap", "sigma_qf", "sigma_qf_freq", "sigmahat_qf", "sigmahat_qf_freq"],
        rows,
    )?;

    let mut curves = Vec::new();
    let mut violations = Vec::new();
    if a.n_sweep || a.n.is_none() {
        for (id, psi) in &bank {
            match wa.sweep(psi) {
                Ok(c) => curves.push(json!({ "psi_id": id, "invariants_hold": true, "psi_sigma_psi": c.psi_sigma_psi })),
                Err(e) => {
                    violations.push(format!("{id}: {e}"));
                    curves.push(json!({ "psi_id": id, "invariants_hold": false, "violation": e.to_string() }));
                }
            }
        }
    }
    out.json(
        "converge.json",
        "pdapprox.converge/1",
        json!({
            "source": src.describe(),
            "N": a.big_n,
            "ranks": ranks,
            "seed": a.seed,
            "max_sigma_parseval_residual": max_sigma_res,
            "max_sigmahat_parseval_residual": max_hat_res,
            "curves": curves,
            "realization_notes": notes,
        }),
    )?;
    if !violations.is_empty() {
        return Err(AssertionFailed(format!("gap invariants violated: {}", violations.join("; "))).into());
    }
    Ok(())
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    check_window(a.big_n)?;
    if a.count == 0 {
        return Err(config("--count: must be at least 1"));
    }
    if let Some(n) = a.n {
        check_rank(n, a.big_n)?;
    }
    let src = load(&a.source, a.big_n - 1)?;
    let wa = WindowAnalysis::new(&src.cov, a.big_n, &EigenOptions::default())?;
    let s = wa.spectrum();
    let batch = sample_paths(s, a.count, a.seed)?;
    let out = outputs(&a.common)?;
    if !a.no_paths {
        let header: Vec<String> = (0..a.big_n).map(|t| format!("y{t}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let paths = batch.paths();
        out.csv(
            "paths.csv",
            &header,
            (0..a.count).map(|p| paths.row(p).iter().map(|v| num(*v)).collect()),
        )?;
    }
    let cov_dev = (batch.second_moment() - wa.toeplitz()).amax();
    let cov_envelope = 5.0 * (s.largest().powi(2) * 2.0 / a.count as f64).sqrt();
    let mut report = json!({
        "source": src.describe(),
        "N": a.big_n,
        "count": a.count,
        "seed": a.seed,
        "generator_id": batch.generator_id,
        "max_covariance_deviation": cov_dev,
        "covariance_envelope": cov_envelope,
    });
    if let Some(n) = a.n {
        let ap = optimal_approximator(s, n)?;
        let mut entries = Vec::new();
        for (id, psi) in psi_bank(a.big_n, a.seed)? {
            let est = mc_weak_error(&batch, ap.projector(), &psi)?;
            let gap = wa.weak_gap(n, &psi)?;
            entries.push(json!({
                "psi_id": id,
                "estimate": est.estimate,
                "std_error": est.std_error,
                "gap": gap,
                "within_3se": est.agrees_with(gap, 3.0, 1e-12 * wa.sigma_qf(&psi)?.abs()),
            }));
        }
        let orth = mc_orthogonality(&batch, ap.projector())?;
        report["n"] = json!(n);
        report["weak_error"] = Value::Array(entries);
        report["orthogonality_max_abs"] = json!(orth.max_abs);
        report["orthogonality_envelope"] = json!(5.0 * s.largest() / (a.count as f64).sqrt());
    }
    out.json("mc.json", "pdapprox.sample/1", report)?;
    Ok(())
}

pub fn repro(a: &ReproArgs) -> Result<()> {
    let mut ids = if a.criteria.is_empty() {
        repro::CRITERIA.to_vec()
    } else {
        a.criteria.clone()
    };
    ids.sort_unstable();
    ids.dedup();
    if let Some(bad) = ids.iter().find(|&&i| !(1..=8).contains(&i)) {
        let hint = if *bad == 9 {
            " (determinism is checked by running repro twice and comparing the outputs)"
        } else {
            ""
        };
        return Err(config(format!("--criteria: {bad} not in 1..=8{hint}")));
    }
    if a.mc_count < 2 {
        return Err(config("--mc-count: must be at least 2"));
    }
    let cfg = ReproConfig {
        seed: a.seed,
        mc_count: a.mc_count,
        ..ReproConfig::default()
    };
    let outcomes = if ids == repro::CRITERIA {
        repro::run_all(&cfg)?
    } else {
        ids.iter().map(|&i| repro::run(i, &cfg)).collect::<pdapprox::Result<Vec<_>>>()?
    };
    let text = repro::summary_text(&outcomes);
    let out = outputs(&a.common)?;
    out.text("summary.txt", &text)?;
    out.json(
        "summary.json",
        "pdapprox.repro/1",
        json!({
            "seed": a.seed,
            "mc_count": a.mc_count,
            "passed": outcomes.iter().all(|o| o.passed),
            "criteria": outcomes,
        }),
    )?;
    print!("{text}");
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    if !failed.is_empty() {
        return Err(AssertionFailed(format!("criteria failed: {}", failed.join(", "))).into());
    }
    Ok(())
}
