//! Discrete Dirichlet Gaussian free field on the unit square.
//!
//! The domain is D = (0,1)² with an n×n grid of interior nodes at spacing
//! a = 1/(n+1). With S the unweighted 5-point graph Laplacian (diagonal 4,
//! −1 per grid neighbour, Dirichlet boundary), the field is the centered
//! Gaussian vector with covariance
//!
//! ```text
//!     C = 2π·S⁻¹,
//! ```
//!
//! normalized so that C(v,w) ≈ −log|v−w| + log R(v;D) + O(lattice) — the
//! log-correlated regime of the continuum free field. Sampling is exact in
//! the discrete sine eigenbasis of S: the modes φ_pq are sine products, the
//! eigenvalues are σ_pq = 4 − 2cos(πp/(n+1)) − 2cos(πq/(n+1)), and
//! h = Σ ξ_pq √(2π/σ_pq) φ_pq with i.i.d. standard normal ξ.

use thiserror::Error;

use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("point outside the sampling domain: {0}")]
    Domain(String),
    #[error("field values must be finite")]
    NonFinite,
}

/// Interior-grid description: n×n nodes in (0,1)², spacing a = 1/(n+1),
/// plus the sampling seed. The spacing is derived, never stored, so
/// a·(n+1) = 1 holds by construction in the target arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub n: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(n: usize, seed: u64) -> Result<Self, FieldError> {
        if n == 0 {
            return Err(FieldError::InvalidSpec("n must be ≥ 1".into()));
        }
        Ok(Self { n, seed })
    }

    /// Lattice spacing a = 1/(n+1).
    #[inline]
    pub fn spacing<T: Scalar>(&self) -> T {
        T::one() / T::of_usize(self.n + 1)
    }

    /// Number of interior nodes.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    /// Row-major linear index of node (ix, iy), both 0-based.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.n && iy < self.n);
        iy * self.n + ix
    }

    /// Position of node (ix, iy) in D.
    #[inline]
    pub fn position<T: Scalar>(&self, ix: usize, iy: usize) -> (T, T) {
        let a = self.spacing::<T>();
        (a * T::of_usize(ix + 1), a * T::of_usize(iy + 1))
    }

    /// Euclidean distance from node (ix, iy) to ∂D.
    pub fn boundary_distance<T: Scalar>(&self, ix: usize, iy: usize) -> T {
        let (x, y) = self.position::<T>(ix, iy);
        let one = T::one();
        x.min(one - x).min(y).min(one - y)
    }

    /// Nearest interior cell to a point of D, if the point lies in D.
    pub fn nearest_cell<T: Scalar>(&self, x: T, y: T) -> Option<(usize, usize)> {
        let one = T::one();
        if !(x > T::zero() && x < one && y > T::zero() && y < one) {
            return None;
        }
        let np1 = T::of_usize(self.n + 1);
        let clamp = |v: T| -> usize {
            let i = (v * np1 - T::one()).round().to_f64() as isize;
            i.clamp(0, self.n as isize - 1) as usize
        };
        Some((clamp(x), clamp(y)))
    }
}

/// How a field came to be: sampled by this crate, or supplied externally
/// (file reads, shifted copies, synthetic test fields).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Gff,
    Custom,
}

/// A realized field h(v) over the interior nodes, row-major.
#[derive(Clone, Debug)]
pub struct GridField<T> {
    pub spec: GridSpec,
    pub kind: FieldKind,
    values: Vec<T>,
}

impl<T: Scalar> GridField<T> {
    /// Wrap external values (must be finite, length n²).
    pub fn from_values(spec: GridSpec, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != spec.dim() {
            return Err(FieldError::InvalidSpec(format!(
                "expected {} values, got {}",
                spec.dim(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self { spec, kind: FieldKind::Custom, values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn value(&self, ix: usize, iy: usize) -> T {
        self.values[self.spec.index(ix, iy)]
    }

    /// The same field shifted by a constant (kind becomes `Custom`).
    pub fn shifted(&self, c: T) -> Self {
        Self {
            spec: self.spec,
            kind: FieldKind::Custom,
            values: self.values.iter().map(|&v| v + c).collect(),
        }
    }
}

/// Symmetric involutory sine-transform matrix, row-major n×n:
/// F[i][p] = √(2/(n+1))·sin(π(i+1)(p+1)/(n+1)).
///
/// The sine argument is reduced with integer arithmetic before any floating
/// multiply, so large i·p products do not lose precision.
pub(crate) fn sine_matrix<T: Scalar>(n: usize) -> Vec<T> {
    let np1 = n + 1;
    let norm = (T::of(2.0) / T::of_usize(np1)).sqrt();
    let mut f = vec![T::zero(); n * n];
    for i in 0..n {
        for p in 0..n {
            let k = ((i + 1) * (p + 1)) % (2 * np1);
            let frac = T::of_usize(k) / T::of_usize(np1);
            f[i * n + p] = norm * (T::PI() * frac).sin();
        }
    }
    f
}

/// Eigenvalues of the 5-point graph Laplacian, row-major over modes:
/// σ[p][q] = 4 − 2cos(π(p+1)/(n+1)) − 2cos(π(q+1)/(n+1)); all strictly > 0.
pub(crate) fn laplacian_eigenvalues<T: Scalar>(n: usize) -> Vec<T> {
    let np1 = T::of_usize(n + 1);
    let two = T::of(2.0);
    let four = T::of(4.0);
    let c: Vec<T> =
        (0..n).map(|p| (T::PI() * T::of_usize(p + 1) / np1).cos()).collect();
    let mut sig = vec![T::zero(); n * n];
    for p in 0..n {
        for q in 0..n {
            sig[p * n + q] = four - two * c[p] - two * c[q];
        }
    }
    sig
}

/// Row-major square matmul via the GEMM kernel.
pub(crate) fn matmul_square<T: Scalar>(n: usize, a: &[T], b: &[T]) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    T::gemm(
        n,
        n,
        n,
        T::one(),
        a,
        n as isize,
        1,
        b,
        n as isize,
        1,
        T::zero(),
        &mut c,
        n as isize,
        1,
    );
    c
}

/// Exact sample of the Dirichlet GFF with covariance 2π·S⁻¹.
/// Deterministic given `spec` (one ChaCha8 stream, row-major mode order).
pub fn sample_gff<T: Scalar>(spec: &GridSpec) -> Result<GridField<T>, FieldError> {
    if spec.n == 0 {
        return Err(FieldError::InvalidSpec("n must be ≥ 1".into()));
    }
    let n = spec.n;
    let mut rng = rng::master(spec.seed);
    let sig = laplacian_eigenvalues::<T>(n);
    let two_pi = T::of(2.0) * T::PI();
    let mut coef = vec![T::zero(); n * n];
    for (c, s) in coef.iter_mut().zip(sig.iter()) {
        let xi = T::standard_normal(&mut rng);
        *c = xi * (two_pi / *s).sqrt();
    }
    let f = sine_matrix::<T>(n);
    let tmp = matmul_square(n, &f, &coef);
    let values = matmul_square(n, &tmp, &f);
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(GridField { spec: *spec, kind: FieldKind::Gff, values })
}

/// Disc decomposition field Y(z) = Re Σ_{k=1}^{k_max} √(2/k)·ζ_k·z^k with
/// i.i.d. standard complex Gaussian ζ_k (E[ζζ̄] = 1, E[ζ²] = 0), evaluated at
/// the given points of the unit disc.
///
/// Exact covariance of the full series: Cov[Y(z₁), Y(z₂)] = −log|1 − z₁·z̄₂|;
/// the truncation keeps |z| ≤ 0.95 so the tail is negligible against Monte
/// Carlo noise.
pub fn sample_disc_series_field<T: Scalar>(
    k_max: usize,
    points: &[(T, T)],
    seed: u64,
) -> Result<Vec<T>, FieldError> {
    if k_max == 0 {
        return Err(FieldError::InvalidSpec("k_max must be ≥ 1".into()));
    }
    let cap = T::of(0.95);
    for &(re, im) in points {
        let r2 = re * re + im * im;
        if r2 > cap * cap {
            return Err(FieldError::Domain(format!(
                "|z| = {} exceeds the 0.95 truncation-control radius",
                r2.sqrt()
            )));
        }
    }
    let mut rng = rng::master(seed);
    let half = T::of(0.5);
    // ζ_k = (ξ₁ + i·ξ₂)/√2 so that E[ζζ̄] = 1.
    let zeta: Vec<(T, T)> = (0..k_max)
        .map(|_| {
            let re = T::standard_normal(&mut rng) * half.sqrt();
            let im = T::standard_normal(&mut rng) * half.sqrt();
            (re, im)
        })
        .collect();
    Ok(points
        .iter()
        .map(|&(zr, zi)| {
            // Horner-free power walk: w = z^k accumulated multiplicatively.
            let (mut wr, mut wi) = (T::one(), T::zero());
            let mut y = T::zero();
            for (k, &(cr, ci)) in zeta.iter().enumerate() {
                let t = wr * zr - wi * zi;
                wi = wr * zi + wi * zr;
                wr = t;
                let amp = (T::of(2.0) / T::of_usize(k + 1)).sqrt();
                y += amp * (cr * wr - ci * wi);
            }
            y
        })
        .collect())
}
