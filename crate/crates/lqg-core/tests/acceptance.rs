//! End-to-end acceptance suite: each test pins one headline number of the
//! toolkit and prints a single `ACCEPT n: pass/FAIL` verdict line.
//!
//! Run with
//!   cargo test --test acceptance -- --test-threads=1 --nocapture
//! to see the verdict lines in order. The large γ = 0.5 spectral runs
//! (n = 255, k = 1600, seeds 1–3) are solved once and shared; the whole
//! suite is sized for tens of minutes on one desktop core.

use std::sync::OnceLock;

use lqg_core::asymptotics::{tauberian_check, DensityTag};
use lqg_core::field::{sample_disc_series_field, sample_gff, GridSpec};
use lqg_core::gmc::{build_measure, expected_cell_mass};
use lqg_core::green::discrete_green;
use lqg_core::heat::{heat_trace, laplace_of_weighted_trace, j_lambda};
use lqg_core::io::{self, Meta};
use lqg_core::paths::{
    bridge_max_exceed_prob, estimate_cone_constant, htransform_terminal, sample_conditioned,
    ConeFunctional, PathValues,
};
use lqg_core::rng;
use lqg_core::spectral::{assemble_pair, solve_spectrum_opts, SolveOpts, Spectrum};
use lqg_core::stats::{c_gamma, spacing_stats, weyl_fit, IndexWindow};
use lqg_core::util::mean_stderr;
use lqg_core::Scalar;

fn verdict(n: usize, ok: bool, detail: &str) {
    println!("ACCEPT {n:>2}: {} — {detail}", if ok { "pass" } else { "FAIL" });
    assert!(ok, "ACCEPT {n} failed: {detail}");
}

fn median3(mut v: [f64; 3]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[1]
}

/// Two-sample Kolmogorov distance.
fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        if xa[i] <= xb[j] {
            i += 1;
        } else {
            j += 1;
        }
        let gap = (i as f64 / na - j as f64 / nb).abs();
        if gap > d {
            d = gap;
        }
    }
    d
}

// ---------------------------------------------------------------------------
// shared heavy runs

struct LqgRun {
    total: f64,
    lambda: Vec<f64>,
}

static LQG_RUNS: OnceLock<Vec<LqgRun>> = OnceLock::new();

/// The γ = 0.5 production runs: n = 255, k = 1600, seeds 1–3 (~3 min each).
fn lqg_runs() -> &'static [LqgRun] {
    LQG_RUNS.get_or_init(|| {
        (1..=3u64)
            .map(|seed| {
                let spec = GridSpec::new(255, seed).unwrap();
                let h = sample_gff::<f64>(&spec).unwrap();
                let mu = build_measure(&h, 0.5).unwrap();
                let pair = assemble_pair(&mu);
                let opts = SolveOpts { tol: 1e-6, ..SolveOpts::new(1600) };
                let s = solve_spectrum_opts(&pair, &opts).unwrap();
                LqgRun { total: mu.total(), lambda: s.eigenvalues }
            })
            .collect()
    })
}

static FLAT_RUN: OnceLock<Vec<f64>> = OnceLock::new();

/// The γ = 0 calibration run: n = 255, k = 810.
fn flat_run() -> &'static [f64] {
    FLAT_RUN.get_or_init(|| {
        let spec = GridSpec::new(255, 1).unwrap();
        let h = sample_gff::<f64>(&spec).unwrap();
        let mu = build_measure(&h, 0.0).unwrap();
        let pair = assemble_pair(&mu);
        let opts = SolveOpts { tol: 1e-6, ..SolveOpts::new(810) };
        solve_spectrum_opts(&pair, &opts).unwrap().eigenvalues
    })
}

fn solve(n: usize, seed: u64, gamma: f64, k: usize, vectors: bool) -> (Spectrum<f64>, f64) {
    let spec = GridSpec::new(n, seed).unwrap();
    let h = sample_gff::<f64>(&spec).unwrap();
    let mu = build_measure(&h, gamma).unwrap();
    let pair = assemble_pair(&mu);
    let opts = SolveOpts { tol: 1e-8, vectors, ..SolveOpts::new(k) };
    (solve_spectrum_opts(&pair, &opts).unwrap(), mu.total())
}

// ---------------------------------------------------------------------------

#[test]
fn a01_flat_weyl_slope() {
    let c0 = c_gamma(0.0f64).unwrap(); // 1/(2π)
    let fit = weyl_fit(flat_run(), IndexWindow::new(100, 800).unwrap(), c0).unwrap();
    let dev = (fit.slope / c0 - 1.0).abs();
    // Known to sit at -3.8%: the computed slope matches a through-origin fit of
    // the closed-form lattice eigenvalues to six digits, and even the continuum
    // spectrum π²(p²+q²)/2 fits at -4.5% on this window because the boundary
    // term of the two-term counting law, N(λ) = λ/(2π) − √(2λ)/π + o(√λ),
    // contributes -2..-5% here. The 3% gate assumes the leading term alone and
    // is not reachable by a correct solver; it is kept as stated rather than
    // loosened, so this check documents the gap instead of hiding it.
    verdict(
        1,
        dev <= 0.03,
        &format!(
            "flat-grid counting slope {:.6} vs 1/(2π) = {:.6}, deviation {:.2}% (gate 3%; \
             exact-spectrum fit gives the same slope — the √λ boundary term of the \
             counting law exceeds the gate on this window)",
            fit.slope,
            c0,
            dev * 100.0
        ),
    );
}

#[test]
fn a02_flat_exact_modes() {
    let (s, _) = solve(127, 1, 0.0, 20, false);
    // Dirichlet modes of the halved Laplacian: λ = π²(p² + q²)/2, listed as
    // (p² + q², multiplicity) for the first 20 eigenvalues.
    let classes: [(u32, usize); 12] = [
        (2, 1),
        (5, 2),
        (8, 1),
        (10, 2),
        (13, 2),
        (17, 2),
        (18, 1),
        (20, 2),
        (25, 2),
        (26, 2),
        (29, 2),
        (32, 1),
    ];
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut targets = Vec::new();
    for &(sum, mult) in &classes {
        for _ in 0..mult {
            targets.push(pi2 * sum as f64 / 2.0);
        }
    }
    assert_eq!(targets.len(), 20);
    let mut max_dev = 0.0f64;
    for (l, t) in s.eigenvalues.iter().zip(&targets) {
        max_dev = max_dev.max((l / t - 1.0).abs());
    }
    // multiplicities: count computed eigenvalues within 1% of each class
    let mut mult_ok = true;
    for &(sum, mult) in &classes {
        let t = pi2 * sum as f64 / 2.0;
        let cnt = s.eigenvalues.iter().filter(|&&l| (l / t - 1.0).abs() <= 0.01).count();
        if cnt != mult {
            mult_ok = false;
        }
    }
    verdict(
        2,
        max_dev <= 0.01 && mult_ok,
        &format!(
            "first 20 flat modes within {:.3}% of π²(p²+q²)/2 (gate 1%), multiplicities {}",
            max_dev * 100.0,
            if mult_ok { "exact" } else { "WRONG" }
        ),
    );
}

#[test]
fn a03_lqg_weyl_median() {
    let cg = c_gamma(0.5f64).unwrap();
    let win = IndexWindow::new(300, 1500).unwrap();
    let mut devs = [0.0f64; 3];
    let mut details = Vec::new();
    for (i, run) in lqg_runs().iter().enumerate() {
        let reference = cg * run.total;
        let fit = weyl_fit(&run.lambda, win, reference).unwrap();
        devs[i] = (fit.slope / reference - 1.0).abs();
        details.push(format!(
            "seed{} slope {:.5} / c_γ·μ̂(D) {:.5} → {:+.2}%",
            i + 1,
            fit.slope,
            reference,
            (fit.slope / reference - 1.0) * 100.0
        ));
    }
    let med = median3(devs);
    verdict(
        3,
        med <= 0.10,
        &format!("median |slope/(c_γ·μ̂(D)) − 1| = {:.2}% (gate 10%); {}", med * 100.0, details.join("; ")),
    );
}

#[test]
fn a04_riemannian_gap() {
    let cg = c_gamma(0.5f64).unwrap();
    let c0 = c_gamma(0.0f64).unwrap();
    let win = IndexWindow::new(300, 1500).unwrap();
    let mut normalized = [0.0f64; 3];
    for (i, run) in lqg_runs().iter().enumerate() {
        let fit = weyl_fit(&run.lambda, win, cg * run.total).unwrap();
        normalized[i] = fit.slope / run.total;
    }
    let med = median3(normalized);
    let d_gamma = (med - cg).abs();
    let d_flat = (med - c0).abs();
    let margin = d_flat - d_gamma;
    verdict(
        4,
        margin > 0.0,
        &format!(
            "median slope/μ̂(D) = {:.5}: distance to c_γ {:.5} vs to c_0 {:.5}, margin {:+.1}% of c_γ",
            med,
            d_gamma,
            d_flat,
            margin / cg * 100.0
        ),
    );
}

#[test]
fn a05_cone_constant() {
    let combos: [(f64, f64, u64); 3] = [(1.0, 1.0, 41), (0.5, 3.75, 42), (1.5, 1.0, 43)];
    let mut ok = true;
    let mut details = Vec::new();
    for &(gamma, m, seed) in &combos {
        let est =
            estimate_cone_constant(gamma, m, ConeFunctional::Damped, 1e-3, 100_000, seed).unwrap();
        let target = est.target.unwrap();
        let z = (est.mean - target).abs() / est.stderr;
        let rel = (est.mean / target - 1.0).abs();
        if z > 3.0 || rel > 0.02 {
            ok = false;
        }
        details.push(format!(
            "(γ={gamma}, m={m}): {:.5} ± {:.5} vs 1/(πγm) = {:.5} ({:.2}σ, {:.2}%)",
            est.mean,
            est.stderr,
            target,
            z,
            rel * 100.0
        ));
    }
    verdict(
        5,
        ok,
        &format!("10⁵ paths, dt = 10⁻³, gates 3σ and 2%: {}", details.join("; ")),
    );
}

#[test]
fn a06_heat_trace_plateau() {
    let run = &lqg_runs()[0];
    let reference = c_gamma(0.5f64).unwrap() * run.total;
    let times: Vec<f64> = (0..80)
        .map(|i| 1e-5 * (0.5f64 / 1e-5).powf(i as f64 / 79.0))
        .collect();
    let curve = heat_trace(&run.lambda, &times).unwrap();
    // longest contiguous stretch that is both truncation-resolved and within
    // 15% of the constant
    let good: Vec<bool> = (0..times.len())
        .map(|i| {
            curve.resolved[i] && (times[i] * curve.values[i] / reference - 1.0).abs() <= 0.15
        })
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=good.len() {
        match (start, i < good.len() && good[i]) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                if best.map_or(true, |(bs, be)| times[i - 1] / times[s] > times[be] / times[bs]) {
                    best = Some((s, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    let (lo, hi) = best.unwrap_or((0, 0));
    let span = times[hi] / times[lo];
    let t_ok = span >= 10.0;

    // matching λ range: λ = 1/t over the found decade, keeping the λ where
    // the resolvent sum's own truncation bound stays under 5%
    let mut lam_pts = 0usize;
    let mut lam_ok = true;
    let (mut lam_lo, mut lam_hi) = (f64::INFINITY, 0.0f64);
    for i in lo..=hi {
        let lam = 1.0 / times[i];
        let out = laplace_of_weighted_trace(&run.lambda, lam).unwrap();
        if out.bound > 0.05 * out.value {
            continue;
        }
        lam_pts += 1;
        lam_lo = lam_lo.min(lam);
        lam_hi = lam_hi.max(lam);
        if (lam * out.value / reference - 1.0).abs() > 0.15 {
            lam_ok = false;
        }
    }
    verdict(
        6,
        t_ok && lam_ok && lam_pts >= 5,
        &format!(
            "t·S(t) within 15% of c_γ·μ̂(D) = {:.5} over t ∈ [{:.2e}, {:.2e}] (×{:.0}, gate ×10); \
             λ·Σ(λ+λ_n)⁻² within 15% at {} resolved λ in [{:.0}, {:.0}]",
            reference, times[lo], times[hi], span, lam_pts, lam_lo, lam_hi
        ),
    );
}

#[test]
fn a07_bridge_max_law() {
    let mut ok = true;
    let mut details = Vec::new();
    for &k in &[0.5f64, 1.0, 1.5] {
        let mut means = Vec::new();
        for (steps, seed) in [(128usize, 31u64), (256, 32)] {
            let est = bridge_max_exceed_prob(k, 1.0, steps, 100_000, seed).unwrap();
            let target = est.target.unwrap();
            let z = (est.mean - target).abs() / est.stderr;
            if z > 4.0 {
                ok = false;
            }
            means.push((est.mean, est.stderr, z));
        }
        // refinement stability: the two estimates agree within combined error
        let (m1, s1, z1) = means[0];
        let (m2, s2, z2) = means[1];
        let zd = (m1 - m2).abs() / (s1 * s1 + s2 * s2).sqrt();
        if zd > 4.0 {
            ok = false;
        }
        details.push(format!(
            "k={k}: {:.4}/{:.4} vs e^(−2k²) = {:.4} (z {:.1}/{:.1}, refine z {:.1})",
            m1,
            m2,
            (-2.0 * k * k).exp(),
            z1,
            z2,
            zd
        ));
    }
    verdict(7, ok, &format!("10⁵ bridges, ℓ = 1, steps 128→256: {}", details.join("; ")));
}

#[test]
fn a08_unfolded_spacing() {
    let cg = c_gamma(0.5f64).unwrap();
    let win = IndexWindow::new(300, 1500).unwrap();
    let mut mean_devs = [0.0f64; 3];
    let mut details = Vec::new();
    for (i, run) in lqg_runs().iter().enumerate() {
        let st = spacing_stats(&run.lambda, win, cg * run.total).unwrap();
        mean_devs[i] = (st.mean_gap - 1.0).abs();
        details.push(format!(
            "seed{} mean gap {:.4}, KS vs Wigner {:.4}",
            i + 1,
            st.mean_gap,
            st.ks_vs_wigner
        ));
    }
    let med = median3(mean_devs);
    verdict(
        8,
        med <= 0.05,
        &format!(
            "median |mean unfolded gap − 1| = {:.2}% (gate 5%); {} (KS reported, not gated)",
            med * 100.0,
            details.join("; ")
        ),
    );
}

#[test]
fn a09_field_measure_oracles() {
    let n = 8usize;
    let n_samples = 6000usize;
    let gamma = 0.8f64;
    let nodes = [(0usize, 0usize), (3, 4), (7, 7), (2, 6), (5, 1)];
    let spec = GridSpec::new(n, 0).unwrap();
    let pairs: Vec<_> = nodes.iter().map(|&v| (v, v)).collect();
    let green = discrete_green::<f64>(&spec, &pairs).unwrap();

    // one pass of field samples feeds both the covariance and the mean-mass
    // checks
    let mut node_pairs = Vec::new();
    for i in 0..nodes.len() {
        for j in i..nodes.len() {
            node_pairs.push((nodes[i], nodes[j]));
        }
    }
    let mut prods = vec![Vec::with_capacity(n_samples); node_pairs.len()];
    let mut masses = vec![Vec::with_capacity(n_samples); nodes.len()];
    for s in 0..n_samples {
        let spec_s = GridSpec::new(n, 10_000 + s as u64).unwrap();
        let h = sample_gff::<f64>(&spec_s).unwrap();
        for (p, &(v, w)) in node_pairs.iter().enumerate() {
            prods[p].push(h.value(v.0, v.1) * h.value(w.0, w.1));
        }
        let mu = build_measure(&h, gamma).unwrap();
        for (q, &v) in nodes.iter().enumerate() {
            masses[q].push(mu.cell(v.0, v.1));
        }
    }
    let mut z_cov = 0.0f64;
    for (p, &(v, w)) in node_pairs.iter().enumerate() {
        let (mean, se) = mean_stderr(&prods[p]);
        let exact = green.covariance(v, w).unwrap();
        z_cov = z_cov.max((mean - exact).abs() / se);
    }
    let mut z_mass = 0.0f64;
    for (q, &v) in nodes.iter().enumerate() {
        let (mean, se) = mean_stderr(&masses[q]);
        let exact = expected_cell_mass(&spec, gamma, green.variance(v.0, v.1));
        z_mass = z_mass.max((mean - exact).abs() / se);
    }

    // disc series field: Var[Y(z)] = −log(1 − |z|²)
    let points = [(0.3f64, 0.0f64), (-0.5, 0.2), (0.1, -0.7), (0.6, 0.6)];
    let n_disc = 20_000usize;
    let mut sq = vec![Vec::with_capacity(n_disc); points.len()];
    for s in 0..n_disc {
        let y = sample_disc_series_field(256, &points, 1_000_000 + s as u64).unwrap();
        for (i, v) in y.into_iter().enumerate() {
            sq[i].push(v * v);
        }
    }
    let mut z_disc = 0.0f64;
    for (i, &(re, im)) in points.iter().enumerate() {
        let (mean, se) = mean_stderr(&sq[i]);
        let exact = -(1.0 - (re * re + im * im)).ln();
        z_disc = z_disc.max((mean - exact).abs() / se);
    }

    verdict(
        9,
        z_cov <= 4.0 && z_mass <= 4.0 && z_disc <= 4.0,
        &format!(
            "max |z| over {} covariance pairs {:.2}, {} lognormal means {:.2}, {} disc variances {:.2} (gate 4σ)",
            node_pairs.len(),
            z_cov,
            nodes.len(),
            z_mass,
            points.len(),
            z_disc
        ),
    );
}

#[test]
fn a10_tauberian_transfer() {
    let grid = [1e2f64, 1e3, 1e4, 1e5, 1e6];
    let mut ok = true;
    let mut details = Vec::new();
    for &rho in &[0.5f64, 1.0, 2.0] {
        let rep = tauberian_check(DensityTag::PurePower, rho, &grid).unwrap();
        if rep.max_rel_deviation > 1e-4 {
            ok = false;
        }
        details.push(format!("ρ={rho}: |1−r| ≤ {:.1e}", rep.max_rel_deviation));
    }
    let log_rep = tauberian_check(DensityTag::LogSlowlyVarying, 0.5, &[1e6f64]).unwrap();
    let log_dev = (log_rep.ratios()[0] - 1.0).abs();
    if log_dev > 0.02 {
        ok = false;
    }
    verdict(
        10,
        ok,
        &format!(
            "pure-power {} (gate 1e-4); log-varying at λ=10⁶: |1−r| = {:.4} (gate 2%)",
            details.join(", "),
            log_dev
        ),
    );
}

#[test]
fn a11_property_suite() {
    // (i) measure scaling: M → cM sends every eigenvalue to λ/c
    let spec = GridSpec::new(25, 5).unwrap();
    let h = sample_gff::<f64>(&spec).unwrap();
    let mu = build_measure(&h, 1.0).unwrap();
    let opts = SolveOpts { tol: 1e-8, ..SolveOpts::new(40) };
    let base = solve_spectrum_opts(&assemble_pair(&mu), &opts).unwrap();
    let scaled = solve_spectrum_opts(&assemble_pair(&mu.scaled(2.7).unwrap()), &opts).unwrap();
    let mut scale_dev = 0.0f64;
    for (l, ls) in base.eigenvalues.iter().zip(&scaled.eigenvalues) {
        scale_dev = scale_dev.max((ls * 2.7 / l - 1.0).abs());
    }
    let scale_ok = scale_dev <= 1e-10;

    // (ii) Σ_x J_λ(x)·μ̂(x) = λ·Σ_n (λ+λ_n)⁻² to round-off
    let (s13, _) = solve(13, 5, 1.0, 80, true);
    let spec13 = GridSpec::new(13, 5).unwrap();
    let mu13 = build_measure(&sample_gff::<f64>(&spec13).unwrap(), 1.0).unwrap();
    let lambda = 40.0f64;
    let j = j_lambda(&s13, lambda).unwrap();
    let lhs: f64 = j.values.iter().zip(mu13.cells()).map(|(&a, &b)| a * b).sum();
    let rhs = lambda * laplace_of_weighted_trace(&s13.eigenvalues, lambda).unwrap().value;
    let j_dev = (lhs / rhs - 1.0).abs();
    let j_ok = j_dev <= 1e-12;

    // (iii) determinism: the full pipeline re-run writes byte-identical output
    let (sa, _) = solve(35, 9, 0.5, 30, false);
    let (sb, _) = solve(35, 9, 0.5, 30, false);
    let dir = std::env::temp_dir();
    let pa = dir.join(format!("lqg-accept-{}-a.spec", std::process::id()));
    let pb = dir.join(format!("lqg-accept-{}-b.spec", std::process::id()));
    io::write_spectrum(&pa, &sa, Meta::default()).unwrap();
    io::write_spectrum(&pb, &sb, Meta::default()).unwrap();
    let bytes_equal = std::fs::read(&pa).unwrap() == std::fs::read(&pb).unwrap();
    let _ = std::fs::remove_file(&pa);
    let _ = std::fs::remove_file(&pb);

    // (iv) conditioned samplers agree: Williams vs h-transform vs rejection,
    // marginal at t = 1 for m = 1.5
    let m = 1.5f64;
    let n_each = 8000usize;
    let dt = 1e-3f64;
    let t_idx = (1.0 / dt).round() as usize;
    let level = m * 1.3 + 6.0 * 1.3f64.sqrt();
    let williams: Vec<f64> = (0..n_each)
        .map(|i| {
            let mut seed = 50_000 + i as u64;
            loop {
                let p = sample_conditioned(m, level, dt, seed).unwrap();
                let PathValues::Scalar(v) = &p.values else { unreachable!() };
                if v.len() > t_idx + 1 {
                    return v[t_idx];
                }
                seed = seed.wrapping_add(0x9e37_79b9);
            }
        })
        .collect();
    let htrans: Vec<f64> =
        (0..n_each).map(|i| htransform_terminal(m, 1.0, dt, 90_000 + i as u64).unwrap()).collect();
    let rejection = {
        let dt_r = 2.5e-4f64;
        let horizon_steps = (4.0 / dt_r) as usize; // condition on [0, 4]: survival past 4 is ~certain
        let read_idx = (1.0 / dt_r) as usize;
        let sdt = dt_r.sqrt();
        let mut out = Vec::with_capacity(n_each);
        let mut stream = 0u64;
        while out.len() < n_each {
            let mut r = rng::substream(130_000, stream);
            stream += 1;
            let mut x = 0.0f64;
            let mut at_t = 0.0f64;
            let mut alive = true;
            for step in 1..=horizon_steps {
                x += m * dt_r + sdt * f64::standard_normal(&mut r);
                if x < 0.0 {
                    alive = false;
                    break;
                }
                if step == read_idx {
                    at_t = x;
                }
            }
            if alive {
                out.push(at_t);
            }
        }
        out
    };
    let ks_wh = ks_distance(&williams, &htrans);
    let ks_wr = ks_distance(&williams, &rejection);
    let ks_hr = ks_distance(&htrans, &rejection);
    let ks_ok = ks_wh <= 0.03 && ks_wr <= 0.03 && ks_hr <= 0.03;

    verdict(
        11,
        scale_ok && j_ok && bytes_equal && ks_ok,
        &format!(
            "scaling dev {:.1e} (gate 1e-10); J-identity dev {:.1e} (gate 1e-12); rerun bytes {}; \
             sampler KS w/h {:.3}, w/r {:.3}, h/r {:.3} (gate 0.03)",
            scale_dev,
            j_dev,
            if bytes_equal { "identical" } else { "DIFFER" },
            ks_wh,
            ks_wr,
            ks_hr
        ),
    );
}
