//! Deterministic checks of the two asymptotic transfer principles the
//! spectral pipeline leans on, exercised on inputs with known closed forms:
//!
//! - Tauberian direction: for a measure ν on (0, 1] with ν(t) ~ t^ρ·(slowly
//!   varying), the Laplace transform satisfies ν̂(λ) ≈ Γ(1+ρ)·ν(1/λ). Both
//!   sides are computed independently (quadrature vs closed form) and
//!   compared pointwise on a λ grid.
//! - Asymptotic differentiation: a monotone density φ is sandwiched by
//!   finite differences of its integral Φ(t) = ∫₀ᵗ u^{α−1}φ(u)du,
//!     α(Φ(bt) − Φ(t))/(t^β(b^α − 1)) ≤ t^{α−β}φ(t) ≤ α(Φ(t) − Φ(t/b))/(t^β(1 − b^{−α})),
//!   with the window b(t) = 1 + √t collapsing as t → 0. The Φ used here are
//!   exact closed forms, so the envelope is tested against its target with no
//!   quadrature error in the way.

use thiserror::Error;

use crate::quad::{tanh_sinh, QuadError};
use crate::scalar::Scalar;
use crate::util::gamma_fn;

#[derive(Debug, Error)]
pub enum AsympError {
    #[error("rho = {0} outside [0, 4]")]
    RhoRange(f64),
    #[error("density not integrable near 0: {0}")]
    NotIntegrable(String),
    #[error("bad evaluation grid: {0}")]
    Grid(String),
    #[error("bad parameter: {0}")]
    Parameter(String),
    #[error("phi must be positive and non-increasing: {0}")]
    Monotonicity(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

/// Test densities for the Tauberian direction, supported on (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityTag {
    /// dν/ds = s^{ρ−1}: ν(t) = t^ρ/ρ; the ratio is 1 for every λ.
    PurePower,
    /// dν/ds = s^{ρ−1}·log(1/s): ν(t) = t^ρ(log(1/t)/ρ + 1/ρ²); the ratio
    /// approaches 1 like 1/log λ.
    LogSlowlyVarying,
}

#[derive(Clone, Debug)]
pub struct TransformReport<T> {
    pub rho: T,
    /// Strictly increasing λ grid.
    pub grid: Vec<T>,
    /// λ^ρ · ν̂(λ), from quadrature.
    pub lhs: Vec<T>,
    /// Γ(1+ρ) · λ^ρ · ν(1/λ), from the closed form.
    pub rhs: Vec<T>,
    pub max_rel_deviation: T,
}

impl<T: Scalar> TransformReport<T> {
    pub fn ratios(&self) -> Vec<T> {
        self.lhs.iter().zip(&self.rhs).map(|(&a, &b)| a / b).collect()
    }
}

fn check_grid<T: Scalar>(grid: &[T]) -> Result<(), AsympError> {
    if grid.is_empty() {
        return Err(AsympError::Grid("empty grid".into()));
    }
    if !(grid[0] > T::zero()) {
        return Err(AsympError::Grid("grid values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AsympError::Grid("grid must strictly increase".into()));
    }
    Ok(())
}

/// Compare λ^ρ ν̂(λ) against Γ(1+ρ) λ^ρ ν(1/λ) on a λ grid.
///
/// The transform side substitutes u = λs, so ν̂(λ) = λ^{−ρ}∫₀^{min(λ,60)}
/// e^{−u} u^{ρ−1} w(u, λ) du with w ≡ 1 (pure power) or w = log λ − log u;
/// the u-cutoff at 60 discards a tail below e^{−60}.
pub fn tauberian_check<T: Scalar>(
    tag: DensityTag,
    rho: T,
    lambdas: &[T],
) -> Result<TransformReport<T>, AsympError> {
    let r = rho.to_f64();
    if !r.is_finite() || !(0.0..=4.0).contains(&r) {
        return Err(AsympError::RhoRange(r));
    }
    if r == 0.0 {
        return Err(AsympError::NotIntegrable(
            "rho = 0 makes s^{ρ−1} non-integrable at 0".into(),
        ));
    }
    check_grid(lambdas)?;
    let quad_tol = T::of(1e-9);
    let gamma_rho1 = gamma_fn(T::one() + rho);
    let mut lhs = Vec::with_capacity(lambdas.len());
    let mut rhs = Vec::with_capacity(lambdas.len());
    let mut max_dev = T::zero();
    for &lam in lambdas {
        let cut = if lam < T::of(60.0) { lam } else { T::of(60.0) };
        let ln_lam = lam.ln();
        let integral = match tag {
            DensityTag::PurePower => tanh_sinh(
                |u: T| (-u).exp() * u.powf(rho - T::one()),
                T::zero(),
                cut,
                quad_tol,
            ),
            DensityTag::LogSlowlyVarying => tanh_sinh(
                |u: T| (-u).exp() * u.powf(rho - T::one()) * (ln_lam - u.ln()),
                T::zero(),
                cut,
                quad_tol,
            ),
        }
        .map_err(|e: QuadError| AsympError::Quadrature(e.to_string()))?;
        // λ^ρ·ν̂(λ) = integral exactly (the λ^{±ρ} factors cancel)
        let l = integral;
        let h = match tag {
            DensityTag::PurePower => gamma_rho1 / rho,
            DensityTag::LogSlowlyVarying => gamma_rho1 / rho * (ln_lam + T::one() / rho),
        };
        let dev = (l / h - T::one()).abs();
        if dev > max_dev {
            max_dev = dev;
        }
        lhs.push(l);
        rhs.push(h);
    }
    Ok(TransformReport { rho, grid: lambdas.to_vec(), lhs, rhs, max_rel_deviation: max_dev })
}

/// Test densities for the differentiation envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiTag {
    /// φ(u) = β·u^{β−α} (needs β ≤ α for monotonicity): Φ(t) = t^β and the
    /// envelope collapses onto the constant β.
    PurePower,
    /// φ(u) = u^{−1/2}(1 + 0.1 sin log u) with α = 1, β = 1/2:
    /// Φ(t) = √t·(2 + 0.04(sin log t − 2 cos log t)), and the envelope must
    /// bracket the oscillating target g(t) = 1 + 0.1 sin log t.
    PerturbedHalf,
}

#[derive(Clone, Debug)]
pub struct EnvelopeReport<T> {
    pub alpha: T,
    pub beta: T,
    pub grid: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// t^{α−β}·φ(t), the bracketed quantity.
    pub target: Vec<T>,
    pub max_rel_width: T,
}

fn phi<T: Scalar>(tag: PhiTag, alpha: T, beta: T, u: T) -> T {
    match tag {
        PhiTag::PurePower => beta * u.powf(beta - alpha),
        PhiTag::PerturbedHalf => {
            u.powf(T::of(-0.5)) * (T::one() + T::of(0.1) * u.ln().sin())
        }
    }
}

fn phi_integral<T: Scalar>(tag: PhiTag, beta: T, t: T) -> T {
    match tag {
        PhiTag::PurePower => t.powf(beta),
        PhiTag::PerturbedHalf => {
            let lt = t.ln();
            t.sqrt() * (T::of(2.0) + T::of(0.04) * (lt.sin() - T::of(2.0) * lt.cos()))
        }
    }
}

/// Evaluate the two-sided finite-difference envelope of t^{α−β}φ(t) on a
/// grid, with b(t) = 1 + √t. Fails if φ sampled on the grid is not positive
/// and non-increasing (the hypothesis of the sandwich).
pub fn asympdiff_check<T: Scalar>(
    tag: PhiTag,
    alpha: T,
    beta: T,
    ts: &[T],
) -> Result<EnvelopeReport<T>, AsympError> {
    if !(alpha > T::zero()) || !(beta > T::zero()) {
        return Err(AsympError::Parameter("alpha and beta must be positive".into()));
    }
    if tag == PhiTag::PerturbedHalf
        && ((alpha - T::one()).abs() > T::of(1e-14) || (beta - T::of(0.5)).abs() > T::of(1e-14))
    {
        return Err(AsympError::Parameter(
            "the perturbed density is defined for alpha = 1, beta = 1/2".into(),
        ));
    }
    check_grid(ts)?;
    // precondition: φ positive and non-increasing along the grid
    let mut prev: Option<T> = None;
    for &t in ts {
        let p = phi(tag, alpha, beta, t);
        if !(p > T::zero()) {
            return Err(AsympError::Monotonicity(format!("phi({:e}) ≤ 0", t.to_f64())));
        }
        if let Some(q) = prev {
            if p > q * (T::one() + T::of(1e-12)) {
                return Err(AsympError::Monotonicity(format!(
                    "phi increases at t = {:e}",
                    t.to_f64()
                )));
            }
        }
        prev = Some(p);
    }
    let mut lower = Vec::with_capacity(ts.len());
    let mut upper = Vec::with_capacity(ts.len());
    let mut target = Vec::with_capacity(ts.len());
    let mut max_w = T::zero();
    for &t in ts {
        let b = T::one() + t.sqrt();
        let tb = t.powf(beta);
        let lo = alpha * (phi_integral(tag, beta, b * t) - phi_integral(tag, beta, t))
            / (tb * (b.powf(alpha) - T::one()));
        let hi = alpha * (phi_integral(tag, beta, t) - phi_integral(tag, beta, t / b))
            / (tb * (T::one() - b.powf(-alpha)));
        let mid = t.powf(alpha - beta) * phi(tag, alpha, beta, t);
        let w = (hi - lo) / mid;
        if w > max_w {
            max_w = w;
        }
        lower.push(lo);
        upper.push(hi);
        target.push(mid);
    }
    Ok(EnvelopeReport { alpha, beta, grid: ts.to_vec(), lower, upper, target, max_rel_width: max_w })
}
