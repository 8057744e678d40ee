//! Spectrum slicing driver for the generalized pencil (K, M).
//!
//! The λ axis is cut into slices by boundaries whose exact eigenvalue counts
//! come from LDLᵀ inertia (Sylvester's law), so the slice populations are
//! known before any Krylov iteration starts. Each slice is then solved by
//! shift-invert block Lanczos on C_σ = M^{1/2}(K − σM)^{−1}M^{1/2} with the
//! shift at the slice midpoint: eigenvalues λ inside the slice map to the
//! extreme values η = 1/(λ − σ) and converge first, while the rest of the
//! spectrum piles up near zero. A slice is accepted only when it holds
//! exactly its inertia count of Ritz values, stable between monitors, with
//! residual bounds below gate, and — decisively — when every extracted pair
//! passes the true pencil residual test. Nothing silently drops.

use std::f64::consts::PI;

use super::band::{assemble_shifted, ldlt, BandFactor, FactorOutcome};
use super::dense::symmetric_eigen;
use super::{
    normalize_signs, verify_pencil_residuals, OperatorPair, SolveMode, SolveOpts, SolverReport,
    SpectralError, Spectrum,
};
use crate::rng::substream;
use crate::scalar::Scalar;

const BLOCK: usize = 2;
const MONITOR_EVERY: usize = 12;

struct Stats {
    factorizations: usize,
    max_growth: f64,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Factor K − σM, nudging σ geometrically outward on pivot breakdown.
/// Returns the shift actually used (callers must treat it as authoritative).
fn factor_near<T: Scalar>(
    n_grid: usize,
    mass: &[T],
    sigma: T,
    step: T,
    stats: &mut Stats,
) -> Result<(T, BandFactor<T>), SpectralError> {
    let mut last_breakdown = (0usize, 0f64);
    for attempt in 0..13u32 {
        let offset = if attempt == 0 {
            T::zero()
        } else {
            let mag = step * T::of(4f64.powi(((attempt - 1) / 2) as i32));
            if attempt % 2 == 1 {
                mag
            } else {
                -mag
            }
        };
        let s = sigma + offset;
        let (dim, bw, data) = assemble_shifted(n_grid, mass, s);
        stats.factorizations += 1;
        match ldlt(dim, bw, data) {
            FactorOutcome::Ok(f) => {
                stats.max_growth = stats.max_growth.max(f.growth);
                return Ok((s, f));
            }
            FactorOutcome::Breakdown { column, pivot } => {
                last_breakdown = (column, pivot);
            }
        }
    }
    Err(SpectralError::Factorization {
        shift: sigma.to_f64(),
        detail: format!(
            "pivot breakdown persisted through shift perturbations (last at column {}, pivot {:e})",
            last_breakdown.0, last_breakdown.1
        ),
    })
}

#[derive(Clone, Copy)]
struct Boundary<T> {
    at: T,
    /// Exact number of pencil eigenvalues below `at`.
    count: usize,
}

/// Choose increasing boundaries b_1 < b_2 < … with N(b_i) stepping by about
/// `slice_target` until N ≥ k. Placement starts from the Weyl prediction and
/// switches to local density extrapolation once data exists; each candidate
/// is verified (and counted) by factorization inertia.
fn find_boundaries<T: Scalar>(
    pair: &OperatorPair<T>,
    k: usize,
    slice_target: usize,
    stats: &mut Stats,
) -> Result<Vec<Boundary<T>>, SpectralError> {
    let n_grid = pair.spec.n;
    let mass = pair.mass();
    let total: f64 = mass.iter().map(|&m| m.to_f64()).sum();
    let g = pair.gamma.to_f64();
    let weyl_density = total / (PI * (2.0 - g * g / 2.0));
    let slack = (slice_target / 2).max(40);
    let mut out: Vec<Boundary<T>> = Vec::new();
    while out.last().map_or(0, |b| b.count) < k {
        let done = out.last().map_or(0, |b| b.count);
        let target = if done + slice_target >= k { k } else { done + slice_target };
        let density = match out.len() {
            0 => weyl_density,
            1 => out[0].count as f64 / out[0].at.to_f64(),
            _ => {
                let a = &out[out.len() - 2];
                let b = &out[out.len() - 1];
                ((b.count - a.count) as f64 / (b.at - a.at).to_f64()).max(weyl_density * 0.2)
            }
        };
        let base = out.last().map_or(T::zero(), |b| b.at);
        let mut guess = base + T::of(((target - done) as f64 + 10.0) / density * 1.1);
        let mut below: Option<T> = None;
        let mut above: Option<T> = None;
        let mut accepted = None;
        for _probe in 0..48 {
            let step = guess * T::of(1e-9);
            let (at, f) = factor_near(n_grid, mass, guess, step, stats)?;
            let count = f.negatives;
            drop(f);
            if count < target {
                below = Some(at);
            } else if count > target + slack {
                above = Some(at);
            } else {
                accepted = Some(Boundary { at, count });
                break;
            }
            guess = match (below, above) {
                (Some(l), Some(h)) => (l + h) * T::of(0.5),
                (Some(l), None) => l * T::of(1.3),
                (None, Some(h)) => (base + h) * T::of(0.5),
                (None, None) => unreachable!(),
            };
        }
        match accepted {
            Some(b) => out.push(b),
            None => {
                return Err(SpectralError::InvalidInput(format!(
                    "slice boundary search stalled near eigenvalue count {target}"
                )))
            }
        }
    }
    Ok(out)
}

/// Orthogonalize `w` against the first `m` columns of `v` (two projection
/// passes) without normalizing; `h` is scratch of length ≥ m.
fn project_out<T: Scalar>(v: &[T], m: usize, dim: usize, w: &mut [T], h: &mut [T]) {
    for _ in 0..2 {
        T::gemm(
            m,
            dim,
            1,
            T::one(),
            &v[..dim * m],
            dim as isize,
            1,
            w,
            1,
            dim as isize,
            T::zero(),
            &mut h[..m],
            1,
            m as isize,
        );
        T::gemm(
            dim,
            m,
            1,
            T::of(-1.0),
            &v[..dim * m],
            1,
            dim as isize,
            &h[..m],
            1,
            m as isize,
            T::one(),
            w,
            1,
            dim as isize,
        );
    }
}

/// Replace a linearly dependent Lanczos column with a fresh random direction
/// orthonormal to everything built so far.
fn redraw_column<T: Scalar>(
    v: &[T],
    m: usize,
    dim: usize,
    w: &mut [T],
    h: &mut [T],
    extra: Option<&[T]>,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    loop {
        for x in w.iter_mut() {
            *x = T::standard_normal(rng);
        }
        project_out(v, m, dim, w, h);
        if let Some(q) = extra {
            let r = dot(q, w);
            for (y, &x) in w.iter_mut().zip(q) {
                *y -= r * x;
            }
        }
        let nw = norm(w);
        if nw > T::of(1e-3) * T::of((dim as f64).sqrt()) {
            for y in w.iter_mut() {
                *y /= nw;
            }
            return;
        }
    }
}

fn select_in_slice<T: Scalar>(etas: &[T], sigma: T, lo: T, hi: T) -> Vec<(T, usize)> {
    let mut out: Vec<(T, usize)> = etas
        .iter()
        .enumerate()
        .filter_map(|(j, &eta)| {
            if eta == T::zero() {
                return None;
            }
            let lam = sigma + T::one() / eta;
            (lam >= lo && lam < hi).then_some((lam, j))
        })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

struct SliceOut<T> {
    lambdas: Vec<T>,
    /// Row-major, vector i at [i·dim, (i+1)·dim); μ-orthonormal.
    vectors: Vec<T>,
    residuals: Vec<T>,
    block_steps: usize,
}

struct SliceCtx<'a, T> {
    pair: &'a OperatorPair<T>,
    sqrt_mass: &'a [T],
    inv_sqrt_mass: &'a [T],
    tol: T,
    seed: u64,
}

/// Shift-invert block Lanczos on one slice [lo, hi) holding exactly `c_slice`
/// eigenvalues. Full reorthogonalization (two-pass classical Gram-Schmidt in
/// gemm form); converged only when the true pencil residuals pass `tol`.
fn lanczos_slice<T: Scalar>(
    ctx: &SliceCtx<'_, T>,
    factor: &BandFactor<T>,
    sigma: T,
    lo: T,
    hi: T,
    c_slice: usize,
    slice_idx: usize,
    collected: usize,
) -> Result<SliceOut<T>, SpectralError> {
    let dim = ctx.pair.dim();
    let max_cols = (3 * c_slice + 260).min(dim) & !1usize;
    let width = hi - lo;
    let eps = T::epsilon();
    let stab_rel = {
        let base = T::of(1e-10);
        let scaled = eps * T::of(100.0);
        if scaled > base { scaled } else { base }
    };
    let stab_abs = eps.max(T::of(1e-12)) * width;
    let mut eta_gate = {
        let base = T::of(1e-8);
        let scaled = eps * T::of(1e3);
        if scaled > base { scaled } else { base }
    };
    let monitor_min = (c_slice + 16).max(48).min(max_cols);

    let mut rng = substream(ctx.seed, 0x511c_e000 + slice_idx as u64);
    let mut v = vec![T::zero(); dim * max_cols];
    let mut tmat = vec![T::zero(); max_cols * max_cols];
    let mut wbuf = vec![T::zero(); dim * BLOCK];
    let mut h1 = vec![T::zero(); max_cols * BLOCK];
    let mut h2 = vec![T::zero(); max_cols * BLOCK];
    let mut mbuf: Vec<T> = Vec::new();

    // random orthonormal start block
    {
        let (c0, c1) = v[..2 * dim].split_at_mut(dim);
        for x in c0.iter_mut() {
            *x = T::standard_normal(&mut rng);
        }
        for x in c1.iter_mut() {
            *x = T::standard_normal(&mut rng);
        }
        let n0 = norm(c0);
        for x in c0.iter_mut() {
            *x /= n0;
        }
        let r = dot(c0, c1);
        for (y, &x) in c1.iter_mut().zip(c0.iter()) {
            *y -= r * x;
        }
        let n1 = norm(c1);
        for y in c1.iter_mut() {
            *y /= n1;
        }
    }

    let mut m = BLOCK;
    let mut steps = 0usize;
    let mut op_scale = T::one();
    let mut prev: Option<Vec<T>> = None;
    let mut last_seen = 0usize;

    loop {
        // W = C_σ · Q_cur  (Q_cur = columns m−2..m)
        for c in 0..BLOCK {
            let src = &v[(m - BLOCK + c) * dim..(m - BLOCK + c + 1) * dim];
            let dst = &mut wbuf[c * dim..(c + 1) * dim];
            for ((d, &s), &sm) in dst.iter_mut().zip(src).zip(ctx.sqrt_mass) {
                *d = s * sm;
            }
        }
        factor.solve(&mut wbuf, BLOCK);
        for c in 0..BLOCK {
            let dst = &mut wbuf[c * dim..(c + 1) * dim];
            for (d, &sm) in dst.iter_mut().zip(ctx.sqrt_mass) {
                *d *= sm;
            }
        }

        // two-pass CGS against every column built so far
        for pass in 0..2 {
            let h = if pass == 0 { &mut h1 } else { &mut h2 };
            T::gemm(
                m,
                dim,
                BLOCK,
                T::one(),
                &v[..dim * m],
                dim as isize,
                1,
                &wbuf,
                1,
                dim as isize,
                T::zero(),
                &mut h[..m * BLOCK],
                1,
                m as isize,
            );
            T::gemm(
                dim,
                m,
                BLOCK,
                T::of(-1.0),
                &v[..dim * m],
                1,
                dim as isize,
                &h[..m * BLOCK],
                1,
                m as isize,
                T::one(),
                &mut wbuf,
                1,
                dim as isize,
            );
        }

        // α block (rows m−2..m of the total projection), symmetrized
        let a00 = h1[m - 2] + h2[m - 2];
        let a10 = h1[m - 1] + h2[m - 1];
        let a01 = h1[m - 2 + m] + h2[m - 2 + m];
        let a11 = h1[m - 1 + m] + h2[m - 1 + m];
        let asym = (a10 + a01) * T::of(0.5);
        tmat[(m - 2) * max_cols + (m - 2)] = a00;
        tmat[(m - 2) * max_cols + (m - 1)] = asym;
        tmat[(m - 1) * max_cols + (m - 2)] = asym;
        tmat[(m - 1) * max_cols + (m - 1)] = a11;
        for t in [a00.abs(), a11.abs(), asym.abs()] {
            if t > op_scale {
                op_scale = t;
            }
        }

        // QR of the remainder → next block and the β coupling
        let defl = T::of(1e-13) * op_scale;
        let (w0, w1) = wbuf.split_at_mut(dim);
        let mut r00 = norm(w0);
        if r00 > defl {
            for x in w0.iter_mut() {
                *x /= r00;
            }
        } else {
            redraw_column(&v, m, dim, w0, &mut h1, None, &mut rng);
            r00 = T::zero();
        }
        let mut r01 = dot(w0, w1);
        for (y, &x) in w1.iter_mut().zip(w0.iter()) {
            *y -= r01 * x;
        }
        let r01b = dot(w0, w1);
        for (y, &x) in w1.iter_mut().zip(w0.iter()) {
            *y -= r01b * x;
        }
        r01 += r01b;
        let mut r11 = norm(w1);
        if r11 > defl {
            for y in w1.iter_mut() {
                *y /= r11;
            }
        } else {
            redraw_column(&v, m, dim, w1, &mut h1, Some(w0), &mut rng);
            r11 = T::zero();
        }
        for t in [r00, r01.abs(), r11] {
            if t > op_scale {
                op_scale = t;
            }
        }

        steps += 1;
        let due = steps % MONITOR_EVERY == 0 && m >= monitor_min;
        let last_chance = m + BLOCK > max_cols;
        if due || last_chance {
            mbuf.resize(m * m, T::zero());
            for r in 0..m {
                mbuf[r * m..r * m + m].copy_from_slice(&tmat[r * max_cols..r * max_cols + m]);
            }
            let (etas, _) = symmetric_eigen(&mbuf, m, false);
            let sel1 = select_in_slice(&etas, sigma, lo, hi);
            last_seen = sel1.len();
            if sel1.len() == c_slice {
                let lams: Vec<T> = sel1.iter().map(|&(l, _)| l).collect();
                let stable = prev.as_ref().is_some_and(|p| {
                    p.len() == c_slice
                        && p.iter()
                            .zip(&lams)
                            .all(|(&a, &b)| (a - b).abs() <= stab_rel * b.abs() + stab_abs)
                });
                prev = Some(lams);
                if stable {
                    let (etas2, z) = symmetric_eigen(&mbuf, m, true);
                    let z = z.unwrap();
                    let sel = select_in_slice(&etas2, sigma, lo, hi);
                    if sel.len() == c_slice {
                        let bounds_ok = sel.iter().all(|&(_, j)| {
                            let z0 = z[(m - 2) * m + j];
                            let z1 = z[(m - 1) * m + j];
                            let b0 = r00 * z0 + r01 * z1;
                            let b1 = r11 * z1;
                            let bnd = (b0 * b0 + b1 * b1).sqrt();
                            bnd <= eta_gate * etas2[j].abs()
                        });
                        if bounds_ok {
                            // extraction + the decisive true-residual test
                            let c = c_slice;
                            let mut zsel = vec![T::zero(); m * c];
                            for (i, &(_, j)) in sel.iter().enumerate() {
                                for r in 0..m {
                                    zsel[r + i * m] = z[r * m + j];
                                }
                            }
                            let mut u = vec![T::zero(); dim * c];
                            T::gemm(
                                dim,
                                m,
                                c,
                                T::one(),
                                &v[..dim * m],
                                1,
                                dim as isize,
                                &zsel,
                                1,
                                m as isize,
                                T::zero(),
                                &mut u,
                                1,
                                dim as isize,
                            );
                            let mut fv = vec![T::zero(); c * dim];
                            for i in 0..c {
                                for (vtx, &is) in ctx.inv_sqrt_mass.iter().enumerate() {
                                    fv[i * dim + vtx] = u[vtx + i * dim] * is;
                                }
                            }
                            let lambdas: Vec<T> = sel.iter().map(|&(l, _)| l).collect();
                            let residuals = verify_pencil_residuals(ctx.pair, &lambdas, &fv)?;
                            if residuals.iter().all(|r| *r <= ctx.tol) {
                                return Ok(SliceOut {
                                    lambdas,
                                    vectors: fv,
                                    residuals,
                                    block_steps: steps,
                                });
                            }
                            eta_gate = eta_gate * T::of(1e-2);
                        }
                    }
                }
            } else {
                prev = None;
            }
        }
        if last_chance {
            return Err(SpectralError::Convergence {
                slice: slice_idx,
                found: last_seen,
                expected: c_slice,
                partial: collected,
            });
        }

        // commit the new block
        tmat[m * max_cols + (m - 2)] = r00;
        tmat[m * max_cols + (m - 1)] = r01;
        tmat[(m + 1) * max_cols + (m - 1)] = r11;
        tmat[(m - 2) * max_cols + m] = r00;
        tmat[(m - 1) * max_cols + m] = r01;
        tmat[(m - 1) * max_cols + (m + 1)] = r11;
        v[m * dim..(m + 1) * dim].copy_from_slice(&wbuf[..dim]);
        v[(m + 1) * dim..(m + 2) * dim].copy_from_slice(&wbuf[dim..]);
        m += BLOCK;
    }
}

pub(crate) fn solve_sliced<T: Scalar>(
    pair: &OperatorPair<T>,
    opts: &SolveOpts<T>,
) -> Result<Spectrum<T>, SpectralError> {
    let dim = pair.dim();
    let k = opts.k;
    let mut stats = Stats { factorizations: 0, max_growth: 0.0 };
    let boundaries = find_boundaries(pair, k, opts.slice_target.max(8), &mut stats)?;
    let sqrt_mass: Vec<T> = pair.mass().iter().map(|&m| m.sqrt()).collect();
    let inv_sqrt_mass: Vec<T> = pair.mass().iter().map(|&m| T::one() / m.sqrt()).collect();
    let ctx = SliceCtx {
        pair,
        sqrt_mass: &sqrt_mass,
        inv_sqrt_mass: &inv_sqrt_mass,
        tol: opts.tol,
        seed: opts.seed,
    };
    let mut lambdas: Vec<T> = Vec::with_capacity(k + 64);
    let mut residuals: Vec<T> = Vec::with_capacity(k + 64);
    let mut vectors: Vec<T> = Vec::new();
    let mut block_steps = 0usize;
    let mut slices = 0usize;
    let mut prev = Boundary { at: T::zero(), count: 0 };
    for b in boundaries {
        let c_slice = b.count - prev.count;
        if c_slice == 0 {
            prev = b;
            continue;
        }
        let sigma_mid = (prev.at + b.at) * T::of(0.5);
        let width = b.at - prev.at;
        let (sigma, factor) =
            factor_near(pair.spec.n, pair.mass(), sigma_mid, width * T::of(1e-6), &mut stats)?;
        let out = lanczos_slice(
            &ctx,
            &factor,
            sigma,
            prev.at,
            b.at,
            c_slice,
            slices,
            lambdas.len(),
        )?;
        block_steps += out.block_steps;
        lambdas.extend_from_slice(&out.lambdas);
        residuals.extend_from_slice(&out.residuals);
        if opts.vectors {
            vectors.extend_from_slice(&out.vectors);
        }
        slices += 1;
        prev = b;
        if lambdas.len() >= k {
            break;
        }
    }
    assert!(lambdas.len() >= k, "slice coverage shortfall");
    for w in lambdas.windows(2) {
        assert!(w[0] <= w[1], "slice merge out of order");
    }
    lambdas.truncate(k);
    residuals.truncate(k);
    if opts.vectors {
        vectors.truncate(k * dim);
        normalize_signs(&mut vectors, k, dim);
    }
    let report = SolverReport {
        mode: SolveMode::Sliced,
        slices,
        factorizations: stats.factorizations,
        block_steps,
        max_growth: stats.max_growth,
        residuals,
    };
    Ok(Spectrum::from_parts(
        pair.spec,
        pair.gamma,
        opts.seed,
        opts.tol,
        lambdas,
        opts.vectors.then_some(vectors),
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{laplacian_eigenvalues, GridField, GridSpec};
    use crate::gmc::build_measure;
    use crate::spectral::assemble_pair;

    #[test]
    fn boundaries_match_analytic_counts_on_flat_measure() {
        let n = 35;
        let spec = GridSpec::new(n, 0).unwrap();
        let h = GridField::from_values(spec, vec![0.0; n * n]).unwrap();
        let pair = assemble_pair(&build_measure(&h, 0.0).unwrap());
        let a2 = 1.0 / ((n as f64 + 1.0) * (n as f64 + 1.0));
        let mut exact: Vec<f64> =
            laplacian_eigenvalues::<f64>(n).iter().map(|s| s / (2.0 * a2)).collect();
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut stats = Stats { factorizations: 0, max_growth: 0.0 };
        let k = 300;
        let bounds = find_boundaries(&pair, k, 90, &mut stats).unwrap();
        assert!(bounds.last().unwrap().count >= k);
        let mut prev = 0usize;
        for b in &bounds {
            let analytic = exact.iter().filter(|&&l| l < b.at).count();
            assert_eq!(b.count, analytic, "inertia disagrees with analytic count");
            assert!(b.count > prev);
            prev = b.count;
        }
        assert!(stats.factorizations < 40, "boundary search too expensive");
    }
}
