//! Discrete Dirichlet Green function tables and conformal-radius estimates.
//!
//! Everything here is about C = 2π·S⁻¹, the covariance of the sampled field:
//! its diagonal V(v) (the per-node variance) and selected full rows (for
//! covariance oracles). The diagonal is a separable double sum over sine
//! modes, computed with two n×n matrix products; each probe row is one fast
//! Poisson solve (sine transform, divide by eigenvalues, transform back).
//!
//! The conformal radius R(v;D) enters through the off-diagonal expansion
//! C(v,w) = −log|v−w| + log R(v;D) + o(1). Fitting that expansion over a
//! window a ≪ |v−w| ≪ d(v,∂D) estimates R without ever touching the lattice
//! self-energy constant that contaminates the diagonal.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::field::{laplacian_eigenvalues, matmul_square, sine_matrix, GridSpec};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum GreenError {
    #[error("node ({0}, {1}) outside the interior grid")]
    InvalidNode(usize, usize),
    #[error("no probe row stored for node ({0}, {1})")]
    MissingProbeRow(usize, usize),
    #[error("only {found} probe nodes in the fit window, need ≥ {need}")]
    InsufficientProbes { found: usize, need: usize },
    #[error("conjugate-gradient solve did not reach tolerance: {0}")]
    SolveFailed(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Diagonal of C plus selected full rows, C = 2π·S⁻¹.
#[derive(Clone, Debug)]
pub struct GreenTable<T> {
    pub spec: GridSpec,
    diag: Vec<T>,
    probe_rows: BTreeMap<usize, Vec<T>>,
}

impl<T: Scalar> GreenTable<T> {
    /// V(v) = C(v,v), the field variance at (ix, iy).
    #[inline]
    pub fn variance(&self, ix: usize, iy: usize) -> T {
        self.diag[self.spec.index(ix, iy)]
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    /// Full covariance row for a probed node.
    pub fn probe_row(&self, ix: usize, iy: usize) -> Option<&[T]> {
        self.probe_rows.get(&self.spec.index(ix, iy)).map(|r| r.as_slice())
    }

    /// C(v,w) if either node carries a probe row.
    pub fn covariance(&self, v: (usize, usize), w: (usize, usize)) -> Option<T> {
        if let Some(row) = self.probe_row(v.0, v.1) {
            return Some(row[self.spec.index(w.0, w.1)]);
        }
        self.probe_row(w.0, w.1).map(|row| row[self.spec.index(v.0, v.1)])
    }

    pub fn probed_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.spec.n;
        self.probe_rows.keys().map(move |&idx| (idx % n, idx / n))
    }
}

/// Build the Green table: full diagonal always, one fast Poisson solve per
/// distinct node appearing in `probes` (either side of a pair, so symmetry
/// C(v,w) = C(w,v) is checkable).
pub fn discrete_green<T: Scalar>(
    spec: &GridSpec,
    probes: &[((usize, usize), (usize, usize))],
) -> Result<GreenTable<T>, GreenError> {
    let n = spec.n;
    for &(v, w) in probes {
        for node in [v, w] {
            if node.0 >= n || node.1 >= n {
                return Err(GreenError::InvalidNode(node.0, node.1));
            }
        }
    }
    let f = sine_matrix::<T>(n);
    let sig = laplacian_eigenvalues::<T>(n);
    debug_assert!(sig.iter().all(|s| *s > T::zero()), "S must be positive definite");
    let two_pi = T::of(2.0) * T::PI();

    // Diagonal: C(v,v) = 2π·Σ_pq F[iy][p]²·F[ix][q]²/σ_pq, separable:
    // with W = F∘F, diag(iy,ix) = 2π·(W·(R·Wᵀ))[iy][ix], R = 1/σ.
    let mut w = vec![T::zero(); n * n];
    for (wi, fi) in w.iter_mut().zip(f.iter()) {
        *wi = *fi * *fi;
    }
    let mut r = vec![T::zero(); n * n];
    for (ri, si) in r.iter_mut().zip(sig.iter()) {
        *ri = T::one() / *si;
    }
    // g[p][j] = Σ_q R[p][q]·W[j][q]  →  g = R·Wᵀ
    let mut g = vec![T::zero(); n * n];
    T::gemm(
        n,
        n,
        n,
        T::one(),
        &r,
        n as isize,
        1,
        &w,
        1,
        n as isize,
        T::zero(),
        &mut g,
        n as isize,
        1,
    );
    let mut diag = matmul_square(n, &w, &g);
    for d in diag.iter_mut() {
        *d *= two_pi;
    }

    let mut probe_rows = BTreeMap::new();
    let mut nodes: Vec<(usize, usize)> = probes.iter().flat_map(|&(v, w)| [v, w]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    for (ix, iy) in nodes {
        // Solve S·g = e_v: coefficients (F·E·F)[p][q] = F[p][iy]·F[ix][q]
        // (rank-one), divide by σ, transform back.
        let mut coef = vec![T::zero(); n * n];
        for p in 0..n {
            let fp = f[p * n + iy];
            for q in 0..n {
                coef[p * n + q] = fp * f[ix * n + q] / sig[p * n + q];
            }
        }
        let tmp = matmul_square(n, &f, &coef);
        let mut row = matmul_square(n, &tmp, &f);
        for x in row.iter_mut() {
            *x *= two_pi;
        }
        probe_rows.insert(spec.index(ix, iy), row);
    }

    Ok(GreenTable { spec: *spec, diag, probe_rows })
}

/// Intercept-only least squares of C(v,w) ≈ −log r + log R over probe nodes
/// w with r = |v−w| in the window; shared by the square-grid and disc-mask
/// estimators.
fn fit_log_radius<T: Scalar>(
    samples: impl Iterator<Item = (T, T)>, // (r, C)
    r_lo: T,
    r_hi: T,
    need: usize,
) -> Result<T, GreenError> {
    let mut sum = T::zero();
    let mut count = 0usize;
    for (r, c) in samples {
        if r >= r_lo && r <= r_hi {
            sum += c + r.ln();
            count += 1;
        }
    }
    if count < need {
        return Err(GreenError::InsufficientProbes { found: count, need });
    }
    Ok(sum / T::of_usize(count))
}

/// Conformal-radius estimate R̂(v) from a probe row: least-squares fit of
/// C(v,w) ≈ −log|v−w| + log R over the window |v−w| ∈ [4a, d(v,∂D)/4].
pub fn conformal_radius_estimate<T: Scalar>(
    green: &GreenTable<T>,
    v: (usize, usize),
) -> Result<T, GreenError> {
    let spec = green.spec;
    let n = spec.n;
    if v.0 >= n || v.1 >= n {
        return Err(GreenError::InvalidNode(v.0, v.1));
    }
    let row = green
        .probe_row(v.0, v.1)
        .ok_or(GreenError::MissingProbeRow(v.0, v.1))?;
    let a = spec.spacing::<T>();
    let d = spec.boundary_distance::<T>(v.0, v.1);
    let (vx, vy) = spec.position::<T>(v.0, v.1);
    let pad = T::of(1.0 + 1e-12);
    let r_lo = T::of(4.0) * a / pad;
    let r_hi = d / T::of(4.0) * pad;
    let samples = (0..n * n).filter(|&idx| idx != spec.index(v.0, v.1)).map(|idx| {
        let (ix, iy) = (idx % n, idx / n);
        let (x, y) = spec.position::<T>(ix, iy);
        let r = ((x - vx) * (x - vx) + (y - vy) * (y - vy)).sqrt();
        (r, row[idx])
    });
    let log_r = fit_log_radius(samples, r_lo, r_hi, 8)?;
    Ok(log_r.exp())
}

/// Conformal radius of the unit disc at its centre, from a masked-lattice
/// Green row (conjugate gradients on the disc-restricted 5-point Laplacian).
/// The exact value is 1; this is the deterministic cross-domain sanity check
/// for the square-grid estimator. `n` must be odd so a node sits at 0.
pub fn disc_center_conformal_radius<T: Scalar>(n: usize) -> Result<T, GreenError> {
    if n < 31 || n % 2 == 0 {
        return Err(GreenError::InvalidParameter(
            "disc mask needs an odd n ≥ 31".into(),
        ));
    }
    let hs = T::of(2.0) / T::of_usize(n + 1);
    let coord = |i: usize| -> T { T::of_usize(i + 1) * hs - T::one() };
    // Mask: strictly interior lattice nodes of the unit disc.
    let mut id_of = vec![usize::MAX; n * n];
    let mut pos = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = (coord(ix), coord(iy));
            if x * x + y * y < T::one() {
                id_of[iy * n + ix] = pos.len();
                pos.push((x, y));
            }
        }
    }
    let dim = pos.len();
    let center_grid = (n - 1) / 2;
    let center = id_of[center_grid * n + center_grid];
    assert!(center != usize::MAX);

    let apply = |x: &[T], y: &mut [T]| {
        for iy in 0..n {
            for ix in 0..n {
                let id = id_of[iy * n + ix];
                if id == usize::MAX {
                    continue;
                }
                let mut acc = T::of(4.0) * x[id];
                let mut nb = |gi: usize| {
                    let j = id_of[gi];
                    if j != usize::MAX {
                        acc -= x[j];
                    }
                };
                if ix > 0 {
                    nb(iy * n + ix - 1);
                }
                if ix + 1 < n {
                    nb(iy * n + ix + 1);
                }
                if iy > 0 {
                    nb((iy - 1) * n + ix);
                }
                if iy + 1 < n {
                    nb((iy + 1) * n + ix);
                }
                y[id] = acc;
            }
        }
    };

    // CG on S·g = e_center (S is SPD on the masked nodes).
    let mut g = vec![T::zero(); dim];
    let mut rhs = vec![T::zero(); dim];
    rhs[center] = T::one();
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![T::zero(); dim];
    let dot = |a: &[T], b: &[T]| -> T {
        let mut s = T::zero();
        for (x, y) in a.iter().zip(b) {
            s += *x * *y;
        }
        s
    };
    let mut rr = dot(&r, &r);
    let tol2 = T::of(1e-26);
    let max_iter = 40 * n;
    let mut converged = false;
    for _ in 0..max_iter {
        if rr <= tol2 {
            converged = true;
            break;
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..dim {
            g[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..dim {
            p[i] = r[i] + beta * p[i];
        }
    }
    if !converged && rr > tol2 {
        return Err(GreenError::SolveFailed(format!(
            "residual² = {} after {} iterations",
            rr.to_f64(),
            max_iter
        )));
    }

    let two_pi = T::of(2.0) * T::PI();
    let r_lo = T::of(4.0) * hs / T::of(1.0 + 1e-12);
    let r_hi = T::of(0.25 * (1.0 + 1e-12));
    let samples = (0..dim).filter(|&i| i != center).map(|i| {
        let (x, y) = pos[i];
        ((x * x + y * y).sqrt(), two_pi * g[i])
    });
    let log_r = fit_log_radius(samples, r_lo, r_hi, 8)?;
    Ok(log_r.exp())
}
