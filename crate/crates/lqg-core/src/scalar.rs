//! Floating-point abstraction the numeric kernels are generic over.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::float::FloatConst;
use num_traits::{Float, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Scalar type of every numeric kernel: IEEE float with the usual constants,
/// lossless-enough conversions against `f64` (tolerances, file payloads),
/// Gaussian sampling, and a dense GEMM kernel.
///
/// Implemented for `f32` and `f64`. File payloads are always written as
/// 64-bit values regardless of the compute type.
pub trait Scalar:
    Float + FloatConst + NumAssign + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;

    fn of_usize(x: usize) -> Self {
        Self::of(x as f64)
    }

    /// One standard normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// `c ← alpha·a·b + beta·c` with explicit row/column strides per matrix,
    /// `a` being `m × k`, `b` being `k × n`, `c` being `m × n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

fn max_linear_index(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    let corner = |i: usize, j: usize| i as isize * rs + j as isize * cs;
    let mut hi = 0isize;
    for (i, j) in [(0, 0), (rows - 1, 0), (0, cols - 1), (rows - 1, cols - 1)] {
        hi = hi.max(corner(i, j));
    }
    hi as usize
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            #[inline(always)]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline(always)]
            fn to_f64(self) -> f64 {
                self as f64
            }

            #[inline(always)]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                assert!(k > 0, "gemm: empty inner dimension");
                assert!(max_linear_index(m, k, rsa, csa) < a.len());
                assert!(max_linear_index(k, n, rsb, csb) < b.len());
                assert!(max_linear_index(m, n, rsc, csc) < c.len());
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);
