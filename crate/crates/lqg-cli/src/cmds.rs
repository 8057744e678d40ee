//! Subcommand bodies. Each takes the raw flag values, resolves them against
//! the config file, computes, writes artifacts with provenance, and prints a
//! short summary to stdout.

use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use lqg_core::asymptotics::{tauberian_check, DensityTag};
use lqg_core::field::{sample_gff, GridSpec};
use lqg_core::gmc::{build_measure as exponentiate, Region};
use lqg_core::heat::{heat_trace, j_lambda, laplace_of_weighted_trace};
use lqg_core::io::{self, ConeCsvRow, Meta, WeylCsvRow};
use lqg_core::paths::{
    bridge_max_exceed_prob, cone_horizon, estimate_cone_constant, sample_beta, ConeFunctional,
    PathValues,
};
use lqg_core::spectral::{assemble_pair, solve_spectrum_opts, SolveMode, SolveOpts};
use lqg_core::stats::{c_gamma, que_overlap, spacing_stats, weyl_fit, IndexWindow};
use lqg_core::{Measure64, Spectrum64};

use crate::config::Resolver;
use crate::error::CliError;
use crate::VERSION;

fn meta(hash: &str) -> Meta<'_> {
    Meta { version: Some(VERSION), config: Some(hash) }
}

/// Worker cap: LQG_THREADS when set, otherwise the machine's parallelism.
/// Results land in per-job slots, so the cap never reaches the output bytes.
fn thread_cap() -> usize {
    std::env::var("LQG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1))
}

/// Run `f` over `jobs` on a capped worker pool and return the results in job
/// order; the first failing job (again in job order) decides the error.
fn run_parallel<J, R, F>(jobs: &[J], f: F) -> Result<Vec<R>, CliError>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> Result<R, CliError> + Sync,
{
    let workers = thread_cap().min(jobs.len()).max(1);
    if workers == 1 {
        return jobs.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut slots: Vec<Option<Result<R, CliError>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let next = &next;
        let f = &f;
        for _ in 0..workers {
            let tx = tx.clone();
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                if tx.send((i, f(&jobs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, res) in rx.iter() {
            slots[i] = Some(res);
        }
    });
    let mut out = Vec::with_capacity(jobs.len());
    for slot in slots {
        out.push(slot.expect("pool covered every job")?);
    }
    Ok(out)
}

/// Measure from an artifact, or sampled fresh from (n, seed, gamma). Either
/// way the grid identity ends up in the recorded config.
fn load_measure(
    r: &mut Resolver,
    path: Option<PathBuf>,
    n: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
) -> Result<Measure64, CliError> {
    let mu = match r.path_opt("measure", path) {
        Some(p) => io::read_measure(&p)?,
        None => {
            let n = r.require("n", n)?;
            let seed = r.require("seed", seed)?;
            let gamma = r.require("gamma", gamma)?;
            let spec = GridSpec::new(n, seed)?;
            exponentiate(&sample_gff::<f64>(&spec)?, gamma)?
        }
    };
    r.record("n", mu.spec.n);
    r.record("seed", mu.spec.seed);
    r.record("gamma", mu.gamma);
    Ok(mu)
}

fn solve(mu: &Measure64, k: usize, tol: f64, vectors: bool) -> Result<Spectrum64, CliError> {
    let pair = assemble_pair(mu);
    let opts = SolveOpts { tol, vectors, ..SolveOpts::new(k) };
    Ok(solve_spectrum_opts(&pair, &opts)?)
}

fn mode_name(mode: SolveMode) -> &'static str {
    match mode {
        SolveMode::Dense => "dense",
        SolveMode::Sliced => "sliced",
    }
}

fn max_residual(s: &Spectrum64) -> f64 {
    s.report.residuals.iter().cloned().fold(0.0, f64::max)
}

/// `base.csv` → `base-s7.csv` when a command writes one file per seed.
fn seeded_path(base: &Path, seed: u64, multi: bool) -> PathBuf {
    if !multi {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match base.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}-s{seed}.{ext}"),
        None => format!("{stem}-s{seed}"),
    };
    base.with_file_name(name)
}

// ---------------------------------------------------------------------------
// sample-field / build-measure / solve-spectrum

pub fn sample_field(
    r: &mut Resolver,
    n: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let n = r.require("n", n)?;
    let seed = r.require("seed", seed)?;
    let out = r.path("out", out)?;
    let spec = GridSpec::new(n, seed)?;
    let field = sample_gff::<f64>(&spec)?;
    let hash = r.hash();
    io::write_field(&out, &field, meta(&hash))?;
    println!("field: n = {n}, seed = {seed} -> {}", out.display());
    Ok(())
}

pub fn build_measure(
    r: &mut Resolver,
    field_path: Option<PathBuf>,
    n: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let gamma = r.require("gamma", gamma)?;
    let out = r.path("out", out)?;
    let field = match r.path_opt("field", field_path) {
        Some(p) => io::read_field(&p)?,
        None => {
            let n = r.require("n", n)?;
            let seed = r.require("seed", seed)?;
            sample_gff::<f64>(&GridSpec::new(n, seed)?)?
        }
    };
    r.record("n", field.spec.n);
    r.record("seed", field.spec.seed);
    let mu = exponentiate(&field, gamma)?;
    let hash = r.hash();
    io::write_measure(&out, &mu, meta(&hash))?;
    println!(
        "measure: n = {}, seed = {}, gamma = {gamma}, total mass {:.6} -> {}",
        mu.spec.n,
        mu.spec.seed,
        mu.total(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn solve_spectrum(
    r: &mut Resolver,
    measure: Option<PathBuf>,
    n: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
    k: Option<usize>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    vectors_out: Option<PathBuf>,
) -> Result<(), CliError> {
    let k = r.require("k", k)?;
    let tol = r.default_to("tol", tol, 1e-6)?;
    let out = r.path("out", out)?;
    let vectors_out = r.path_opt("vectors_out", vectors_out);
    let mu = load_measure(r, measure, n, seed, gamma)?;
    let spectrum = solve(&mu, k, tol, vectors_out.is_some())?;
    let hash = r.hash();
    io::write_spectrum(&out, &spectrum, meta(&hash))?;
    if let Some(vp) = &vectors_out {
        io::write_vectors(vp, &spectrum, meta(&hash))?;
        println!("vectors: k = {k} -> {}", vp.display());
    }
    let ev = &spectrum.eigenvalues;
    println!(
        "spectrum: n = {}, gamma = {}, k = {k}: lambda_1 = {:.6}, lambda_{k} = {:.6} -> {}",
        mu.spec.n,
        mu.gamma,
        ev[0],
        ev[k - 1],
        out.display()
    );
    println!(
        "solver: {} mode, {} slices, {} factorizations, max residual {:.2e}",
        mode_name(spectrum.report.mode),
        spectrum.report.slices,
        spectrum.report.factorizations,
        max_residual(&spectrum)
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// weyl / spacing / heat / jlambda

#[allow(clippy::too_many_arguments)]
pub fn weyl(
    r: &mut Resolver,
    n: Option<usize>,
    gamma: Option<f64>,
    k: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    seeds: Option<String>,
    window_lo: Option<usize>,
    window_hi: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let n = r.require("n", n)?;
    let gamma = r.require("gamma", gamma)?;
    let k = r.require("k", k)?;
    let tol = r.default_to("tol", tol, 1e-6)?;
    let lo = r.default_to("window_lo", window_lo, 300)?;
    let hi = r.default_to("window_hi", window_hi, 1500)?;
    let seeds = r.seed_list(seeds, seed)?;
    let out = r.path("out", out)?;
    let window = IndexWindow::new(lo, hi)?;
    let c_g = c_gamma(gamma)?;
    let c_0 = c_gamma(0.0)?;
    let hash = r.hash();

    let multi = seeds.len() > 1;
    let jobs: Vec<(u64, PathBuf)> =
        seeds.iter().map(|&s| (s, seeded_path(&out, s, multi))).collect();
    let lines = run_parallel(&jobs, |(s, path)| {
        let spec = GridSpec::new(n, *s)?;
        let mu = exponentiate(&sample_gff::<f64>(&spec)?, gamma)?;
        let spectrum = solve(&mu, k, tol, false)?;
        let total = mu.total();
        let fit = weyl_fit(&spectrum.eigenvalues, window, c_g * total)?;
        let rows: Vec<WeylCsvRow> = spectrum
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &lam)| WeylCsvRow {
                lambda: lam,
                count: i + 1,
                prediction: c_g * total * lam,
                riemannian: c_0 * total * lam,
            })
            .collect();
        let mut comments = vec![
            format!("version={VERSION}"),
            format!("config={hash}"),
            format!("seed={s}"),
            format!("mass={total}"),
            format!("window={lo},{hi}"),
            format!("slope={}", fit.slope),
            format!("reference={}", fit.reference),
        ];
        comments.push(format!("riemannian_reference={}", c_0 * total));
        io::write_weyl_csv(path, &rows, &comments)?;
        Ok(format!(
            "seed {s}: slope {:.6}, reference {:.6}, ratio {:.4} -> {}",
            fit.slope,
            fit.reference,
            fit.slope / fit.reference,
            path.display()
        ))
    })?;
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn spacing(
    r: &mut Resolver,
    n: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
    k: Option<usize>,
    tol: Option<f64>,
    window_lo: Option<usize>,
    window_hi: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let k = r.require("k", k)?;
    let tol = r.default_to("tol", tol, 1e-6)?;
    let lo = r.default_to("window_lo", window_lo, 300)?;
    let hi = r.default_to("window_hi", window_hi, 1500)?;
    let out = r.path("out", out)?;
    let mu = load_measure(r, None, n, seed, gamma)?;
    let spectrum = solve(&mu, k, tol, false)?;
    let unfold = c_gamma(mu.gamma)? * mu.total();
    let stats = spacing_stats(&spectrum.eigenvalues, IndexWindow::new(lo, hi)?, unfold)?;
    let mut comments = r.comments(mu.spec.seed);
    comments.push(format!("window={lo},{hi}"));
    comments.push(format!("mean_gap={}", stats.mean_gap));
    comments.push(format!("ks_vs_wigner={}", stats.ks_vs_wigner));
    io::write_spacing_csv(&out, &stats, &comments)?;
    println!(
        "spacing: {} gaps, mean unfolded gap {:.4}, KS vs Wigner {:.4} -> {}",
        stats.gaps.len(),
        stats.mean_gap,
        stats.ks_vs_wigner,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn heat(
    r: &mut Resolver,
    n: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
    k: Option<usize>,
    tol: Option<f64>,
    t_lo: Option<f64>,
    t_hi: Option<f64>,
    t_points: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let k = r.require("k", k)?;
    let tol = r.default_to("tol", tol, 1e-6)?;
    let t_lo = r.default_to("t_lo", t_lo, 1e-4)?;
    let t_hi = r.default_to("t_hi", t_hi, 1.0)?;
    let points = r.default_to("t_points", t_points, 60)?;
    let out = r.path("out", out)?;
    if !(t_lo > 0.0 && t_hi > t_lo) || points < 2 {
        return Err(CliError::Config(format!(
            "time grid needs 0 < t_lo < t_hi and ≥ 2 points, got ({t_lo}, {t_hi}) × {points}"
        )));
    }
    let mu = load_measure(r, None, n, seed, gamma)?;
    let spectrum = solve(&mu, k, tol, false)?;
    let ratio = t_hi / t_lo;
    let times: Vec<f64> =
        (0..points).map(|i| t_lo * ratio.powf(i as f64 / (points - 1) as f64)).collect();
    let curve = heat_trace(&spectrum.eigenvalues, &times)?;
    let resolved = curve.resolved.iter().filter(|&&b| b).count();
    if resolved == 0 {
        return Err(CliError::Resolution(format!(
            "no time in [{t_lo}, {t_hi}] is resolved by {k} eigenvalues; \
             raise k or move the grid to larger t"
        )));
    }
    let reference = c_gamma(mu.gamma)? * mu.total();
    let mut comments = r.comments(mu.spec.seed);
    comments.push(format!("reference={reference}"));
    io::write_heat_csv(&out, &curve, reference, &comments)?;
    let last = (0..times.len()).rev().find(|&i| curve.resolved[i]).unwrap();
    println!(
        "heat: {resolved} of {points} times resolved; at t = {:.4}: t*S = {:.6} vs reference {:.6} -> {}",
        times[last],
        times[last] * curve.values[last],
        reference,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn jlambda(
    r: &mut Resolver,
    n: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
    k: Option<usize>,
    tol: Option<f64>,
    lambda: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let k = r.require("k", k)?;
    let tol = r.default_to("tol", tol, 1e-6)?;
    let lambda = r.require("lambda", lambda)?;
    let out = r.path("out", out)?;
    let mu = load_measure(r, None, n, seed, gamma)?;
    let spectrum = solve(&mu, k, tol, true)?;
    let field = j_lambda(&spectrum, lambda)?;
    if field.truncated {
        return Err(CliError::Resolution(format!(
            "J at lambda = {lambda} is truncation-dominated with k = {k} eigenvalues; \
             raise k or lower lambda"
        )));
    }
    let mut comments = r.comments(mu.spec.seed);
    comments.push(format!("lambda={lambda}"));
    io::write_jlambda_csv(&out, &field.values, mu.cells(), lambda, &comments)?;
    // sanity identity: Σ_x J(x) μ̂(x) = λ Σ_n (λ + λ_n)^{−2}
    let lhs: f64 = field.values.iter().zip(mu.cells()).map(|(j, m)| j * m).sum();
    let rhs = lambda * laplace_of_weighted_trace(&spectrum.eigenvalues, lambda)?.value;
    println!(
        "jlambda: lambda = {lambda}, sum J*mass = {lhs:.9} (spectral value {rhs:.9}) -> {}",
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// cone-mc / bridge-check / tauberian

#[allow(clippy::too_many_arguments)]
pub fn cone_mc(
    r: &mut Resolver,
    gamma: Option<f64>,
    m: Option<f64>,
    dt: Option<f64>,
    paths: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    dump_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let gamma = r.require("gamma", gamma)?;
    let m = r.require("m", m)?;
    let dt = r.default_to("dt", dt, 1e-3)?;
    let n_paths = r.default_to("paths", paths, 100_000)?;
    let seed = r.default_to("seed", seed, 1)?;
    let out = r.path("out", out)?;
    let dump = r.path_opt("dump_path", dump_path);

    let est = estimate_cone_constant(gamma, m, ConeFunctional::Damped, dt, n_paths, seed)?;
    let target = 1.0 / (std::f64::consts::PI * gamma * m);
    let row = ConeCsvRow {
        gamma,
        m,
        f: ConeFunctional::<f64>::Damped.label(),
        n_paths: est.n_paths,
        dt,
        t_span: cone_horizon(gamma, m),
        mean: est.mean,
        stderr: est.stderr,
        target,
    };
    let comments = r.comments(seed);
    io::write_cone_csv(&out, &[row], &comments)?;
    let z = (est.mean - target) / est.stderr;
    println!(
        "cone: gamma = {gamma}, m = {m}: mean {:.6} ± {:.6}, target {target:.6}, z = {z:.2} -> {}",
        est.mean,
        est.stderr,
        out.display()
    );

    if let Some(dp) = dump {
        let sample = sample_beta(m, cone_horizon(gamma, m), dt, seed)?;
        let PathValues::Scalar(vals) = &sample.values else {
            return Err(CliError::Config("unexpected planar path from sampler".into()));
        };
        let mut w = BufWriter::new(File::create(&dp)?);
        for c in &comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "t,value")?;
        let origin = sample.params.origin_index as f64;
        for (i, v) in vals.iter().enumerate() {
            writeln!(w, "{},{}", (i as f64 - origin) * dt, v)?;
        }
        w.flush()?;
        println!("path dump: {} samples -> {}", vals.len(), dp.display());
    }
    Ok(())
}

pub fn bridge_check(
    r: &mut Resolver,
    paths: Option<usize>,
    steps: Option<usize>,
    ell: Option<f64>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let n_paths = r.default_to("paths", paths, 100_000)?;
    let steps = r.default_to("steps", steps, 128)?;
    let ell = r.default_to("ell", ell, 1.0)?;
    let seed = r.default_to("seed", seed, 1)?;
    println!(
        "bridge maximum law on [0, {ell}]: {n_paths} bridges, exact P(max ≥ k) = exp(−2k²/ell)"
    );
    let mut case = 0u64;
    for &k in &[0.5f64, 1.0, 1.5] {
        for s in [steps, steps * 2] {
            let est = bridge_max_exceed_prob(k, ell, s, n_paths, seed.wrapping_add(case))?;
            case += 1;
            let exact = (-2.0 * k * k / ell).exp();
            let z = (est.mean - exact) / est.stderr;
            let tag = if z.abs() <= 4.0 { "ok" } else { "DEVIATES" };
            println!(
                "k = {k:<4} steps = {s:<6} empirical {:.5} ± {:.5}  exact {exact:.5}  z = {z:+.2}  [{tag}]",
                est.mean, est.stderr
            );
        }
    }
    Ok(())
}

pub fn tauberian(r: &mut Resolver, out: Option<PathBuf>) -> Result<(), CliError> {
    let out = r.path("out", out)?;
    let grid = [1e2, 1e3, 1e4, 1e5, 1e6];
    let cases: [(&str, DensityTag, f64); 4] = [
        ("power-rho-0.5", DensityTag::PurePower, 0.5),
        ("power-rho-1", DensityTag::PurePower, 1.0),
        ("power-rho-2", DensityTag::PurePower, 2.0),
        ("log-rho-0.5", DensityTag::LogSlowlyVarying, 0.5),
    ];
    let mut reports = Vec::new();
    for (name, tag, rho) in cases {
        reports.push((name, tauberian_check(tag, rho, &grid)?));
    }
    let named: Vec<(&str, &_)> = reports.iter().map(|(n, rep)| (*n, rep)).collect();
    let comments = vec![format!("version={VERSION}"), format!("config={}", r.hash())];
    io::write_tauberian_csv(&out, &named, &comments)?;
    for (name, rep) in &reports {
        println!("tauberian {name}: max relative deviation {:.3e}", rep.max_rel_deviation);
    }
    println!("-> {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// reproduce-figures

#[allow(clippy::too_many_arguments)]
pub fn reproduce_figures(
    r: &mut Resolver,
    n: Option<usize>,
    gamma: Option<f64>,
    k: Option<usize>,
    tol: Option<f64>,
    seeds: Option<String>,
    dt: Option<f64>,
    paths: Option<usize>,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let n = r.default_to("n", n, 255)?;
    let gamma = r.default_to("gamma", gamma, 0.5)?;
    let k = r.default_to("k", k, 1600)?;
    let tol = r.default_to("tol", tol, 1e-6)?;
    let seeds = match seeds {
        Some(_) => r.seed_list(seeds, None)?,
        None => r.seed_list(Some("1,2,3".into()), None)?,
    };
    let dt = r.default_to("dt", dt, 1e-3)?;
    let n_paths = r.default_to("paths", paths, 100_000)?;
    let dir = r.path_opt("out_dir", out_dir).unwrap_or_else(|| PathBuf::from("figures"));
    fs::create_dir_all(&dir)?;
    let hash = r.hash();
    let c_g = c_gamma(gamma)?;
    let c_0 = c_gamma(0.0)?;
    let window = IndexWindow::new(300.min(k / 4).max(100), 1500.min(k))?;

    // Counting data, one solve per seed; the first seed also persists its
    // field and measure artifacts.
    let first = seeds[0];
    let jobs: Vec<u64> = seeds.clone();
    let runs = run_parallel(&jobs, |&s| {
        let spec = GridSpec::new(n, s)?;
        let field = sample_gff::<f64>(&spec)?;
        let mu = exponentiate(&field, gamma)?;
        if s == first {
            io::write_field(&dir.join("field.lqgf"), &field, meta(&hash))?;
            io::write_measure(&dir.join("measure.lqgm"), &mu, meta(&hash))?;
        }
        let spectrum = solve(&mu, k, tol, false)?;
        io::write_spectrum(&dir.join(format!("spectrum-s{s}.lqgs")), &spectrum, meta(&hash))?;
        let total = mu.total();
        let fit = weyl_fit(&spectrum.eigenvalues, window, c_g * total)?;
        let rows: Vec<WeylCsvRow> = spectrum
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &lam)| WeylCsvRow {
                lambda: lam,
                count: i + 1,
                prediction: c_g * total * lam,
                riemannian: c_0 * total * lam,
            })
            .collect();
        let comments = vec![
            format!("version={VERSION}"),
            format!("config={hash}"),
            format!("seed={s}"),
            format!("mass={total}"),
            format!("slope={}", fit.slope),
            format!("reference={}", fit.reference),
        ];
        io::write_weyl_csv(&dir.join(format!("weyl-s{s}.csv")), &rows, &comments)?;
        let line = format!(
            "weyl seed {s}: slope/reference = {:.4} (slope {:.6}, reference {:.6})",
            fit.slope / fit.reference,
            fit.slope,
            fit.reference
        );
        Ok((s, spectrum.eigenvalues, total, line))
    })?;
    for (_, _, _, line) in &runs {
        println!("{line}");
    }

    // Spacing and heat statistics come from the first seed's spectrum.
    let (_, ev0, total0, _) = &runs[0];
    let unfold = c_g * *total0;
    let stats = spacing_stats(ev0, window, unfold)?;
    let mut comments = vec![
        format!("version={VERSION}"),
        format!("config={hash}"),
        format!("seed={first}"),
        format!("mean_gap={}", stats.mean_gap),
        format!("ks_vs_wigner={}", stats.ks_vs_wigner),
    ];
    io::write_spacing_csv(&dir.join("spacing.csv"), &stats, &comments)?;
    println!(
        "spacing: mean unfolded gap {:.4}, KS vs Wigner {:.4}",
        stats.mean_gap, stats.ks_vs_wigner
    );

    let times: Vec<f64> = (0..80).map(|i| 1e-5 * (0.5f64 / 1e-5).powf(i as f64 / 79.0)).collect();
    let curve = heat_trace(ev0, &times)?;
    comments = vec![
        format!("version={VERSION}"),
        format!("config={hash}"),
        format!("seed={first}"),
        format!("reference={unfold}"),
    ];
    io::write_heat_csv(&dir.join("heat.csv"), &curve, unfold, &comments)?;
    println!("heat: {} of {} times resolved", curve.resolved.iter().filter(|&&b| b).count(), times.len());

    // Eigenvector-based panels on a coarser grid where vectors are cheap.
    let n_vec = 127.min(n);
    let spec_vec = GridSpec::new(n_vec, first)?;
    let mu_vec = exponentiate(&sample_gff::<f64>(&spec_vec)?, gamma)?;
    let k_vec = 256.min(mu_vec.spec.dim() / 2);
    let spectrum_vec = solve(&mu_vec, k_vec, tol, true)?;
    let lambda_j = 25.0;
    let field_j = j_lambda(&spectrum_vec, lambda_j)?;
    comments = vec![
        format!("version={VERSION}"),
        format!("config={hash}"),
        format!("seed={first}"),
        format!("n={n_vec}"),
        format!("lambda={lambda_j}"),
    ];
    io::write_jlambda_csv(
        &dir.join("jlambda.csv"),
        &field_j.values,
        mu_vec.cells(),
        lambda_j,
        &comments,
    )?;

    let hi_band: Vec<usize> = (k_vec.saturating_sub(64)..k_vec).collect();
    let mut que_rows = Vec::new();
    for region in [
        Region::LeftHalf,
        Region::BottomHalf,
        Region::Quadrant(0),
        Region::Quadrant(1),
        Region::Quadrant(2),
        Region::Quadrant(3),
    ] {
        que_rows.extend(que_overlap(&spectrum_vec, &mu_vec, region, &hi_band)?);
    }
    comments = vec![
        format!("version={VERSION}"),
        format!("config={hash}"),
        format!("seed={first}"),
        format!("n={n_vec}"),
    ];
    io::write_que_csv(&dir.join("que.csv"), &que_rows, &comments)?;
    println!("jlambda + que: n = {n_vec}, k = {k_vec}, {} overlap rows", que_rows.len());

    // Path-space panels are independent of the measure pipeline.
    let cone_gamma = 1.0;
    let cone_m = 1.0;
    let est = estimate_cone_constant(cone_gamma, cone_m, ConeFunctional::Damped, dt, n_paths, first)?;
    let target = 1.0 / (std::f64::consts::PI * cone_gamma * cone_m);
    let row = ConeCsvRow {
        gamma: cone_gamma,
        m: cone_m,
        f: ConeFunctional::<f64>::Damped.label(),
        n_paths: est.n_paths,
        dt,
        t_span: cone_horizon(cone_gamma, cone_m),
        mean: est.mean,
        stderr: est.stderr,
        target,
    };
    comments = vec![
        format!("version={VERSION}"),
        format!("config={hash}"),
        format!("seed={first}"),
    ];
    io::write_cone_csv(&dir.join("cone.csv"), &[row], &comments)?;
    println!(
        "cone: mean {:.6} ± {:.6} vs target {:.6}",
        est.mean, est.stderr, target
    );

    let grid = [1e2, 1e3, 1e4, 1e5, 1e6];
    let t_cases: [(&str, DensityTag, f64); 4] = [
        ("power-rho-0.5", DensityTag::PurePower, 0.5),
        ("power-rho-1", DensityTag::PurePower, 1.0),
        ("power-rho-2", DensityTag::PurePower, 2.0),
        ("log-rho-0.5", DensityTag::LogSlowlyVarying, 0.5),
    ];
    let mut reports = Vec::new();
    for (name, tag, rho) in t_cases {
        reports.push((name, tauberian_check(tag, rho, &grid)?));
    }
    let named: Vec<(&str, &_)> = reports.iter().map(|(n, rep)| (*n, rep)).collect();
    comments = vec![format!("version={VERSION}"), format!("config={hash}")];
    io::write_tauberian_csv(&dir.join("tauberian.csv"), &named, &comments)?;

    println!("figure data complete -> {}", dir.display());
    Ok(())
}
