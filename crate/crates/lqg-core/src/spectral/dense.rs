//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! with accumulated transforms, then implicit-shift QL. Used directly for
//! small operators and for the projected (Rayleigh–Ritz) problems inside the
//! sliced solver, so it must be trustworthy rather than fast: classic
//! EISPACK-style formulation, eigenvalues returned ascending.

use crate::scalar::Scalar;

/// Eigendecomposition of the symmetric matrix `a` (row-major dim×dim; only
/// assumed symmetric, the full square is read). Returns eigenvalues ascending
/// and, if requested, the orthonormal eigenvectors as a row-major dim×dim
/// matrix whose COLUMN j is the eigenvector of eigenvalue j.
pub(crate) fn symmetric_eigen<T: Scalar>(
    a: &[T],
    dim: usize,
    want_vectors: bool,
) -> (Vec<T>, Option<Vec<T>>) {
    assert!(dim > 0 && a.len() == dim * dim);
    let mut z = a.to_vec();
    let mut d = vec![T::zero(); dim];
    let mut e = vec![T::zero(); dim];
    tred2(&mut z, dim, &mut d, &mut e, want_vectors);
    tql2(&mut d, &mut e, if want_vectors { Some(&mut z) } else { None }, dim);
    // Sort ascending, permuting eigenvector columns along.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let evals: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let evecs = want_vectors.then(|| {
        let mut v = vec![T::zero(); dim * dim];
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..dim {
                v[row * dim + new_col] = z[row * dim + old_col];
            }
        }
        v
    });
    (evals, evecs)
}

/// Householder reduction of the symmetric matrix in `z` to tridiagonal form
/// (d = diagonal, e = subdiagonal in e[1..]). With `accumulate`, `z` is
/// overwritten by the orthogonal Q with A = Q·T·Qᵀ; otherwise `z` holds
/// scratch only.
fn tred2<T: Scalar>(z: &mut [T], n: usize, d: &mut [T], e: &mut [T], accumulate: bool) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let mut scale = T::zero();
            for k in 0..=l {
                scale += z[i * n + k].abs();
            }
            if scale == T::zero() {
                e[i] = z[i * n + l];
            } else {
                for k in 0..=l {
                    z[i * n + k] /= scale;
                    h += z[i * n + k] * z[i * n + k];
                }
                let f = z[i * n + l];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i * n + l] = f - g;
                let mut fsum = T::zero();
                for j in 0..=l {
                    if accumulate {
                        z[j * n + i] = z[i * n + j] / h;
                    }
                    let mut g = T::zero();
                    for k in 0..=j {
                        g += z[j * n + k] * z[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += z[k * n + j] * z[i * n + k];
                    }
                    e[j] = g / h;
                    fsum += e[j] * z[i * n + j];
                }
                let hh = fsum / (h + h);
                for j in 0..=l {
                    let f = z[i * n + j];
                    let gj = e[j] - hh * f;
                    e[j] = gj;
                    for k in 0..=j {
                        z[j * n + k] = z[j * n + k] - f * e[k] - gj * z[i * n + k];
                    }
                }
            }
        } else {
            e[i] = z[i * n + l];
        }
        d[i] = h;
    }
    d[0] = T::zero();
    e[0] = T::zero();
    for i in 0..n {
        if accumulate {
            if d[i] != T::zero() {
                for j in 0..i {
                    let mut g = T::zero();
                    for k in 0..i {
                        g += z[i * n + k] * z[k * n + j];
                    }
                    for k in 0..i {
                        z[k * n + j] = z[k * n + j] - g * z[k * n + i];
                    }
                }
            }
            d[i] = z[i * n + i];
            z[i * n + i] = T::one();
            for j in 0..i {
                z[j * n + i] = T::zero();
                z[i * n + j] = T::zero();
            }
        } else {
            d[i] = z[i * n + i];
        }
    }
}

/// Implicit-shift QL on the tridiagonal (d, e[1..]); rotates the columns of
/// `z` along when present. Eigenvalues land in `d` (unsorted).
fn tql2<T: Scalar>(d: &mut [T], e: &mut [T], mut z: Option<&mut [T]>, n: usize) {
    if n == 1 {
        return;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 60, "QL failed to converge at index {l}");
            let mut g = (d[l + 1] - d[l]) / (T::of(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            let denom = g + r.abs().copysign(g);
            g = d[m] - d[l] + e[l] / denom;
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::of(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    for k in 0..n {
                        f = zm[k * n + i + 1];
                        zm[k * n + i + 1] = s * zm[k * n + i] + c * f;
                        zm[k * n + i] = c * zm[k * n + i] - s * f;
                    }
                }
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
}
