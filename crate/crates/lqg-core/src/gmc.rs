//! Liouville measure from a sampled field: μ̂(v) = a^{2+γ²/2}·e^{γh(v)} per
//! interior node, the discrete Gaussian multiplicative chaos on the grid.
//!
//! The exponent 2 + γ²/2 in the cell weight is the Seiberg-type
//! renormalisation: a² is the cell area, a^{γ²/2} compensates the divergence
//! of e^{γh} as the variance of h grows like −(γ²/2)·log a near the centre.
//! The expected mass of a single cell is then a^{2+γ²/2}·e^{(γ²/2)V(v)} with
//! V(v) the exact field variance — a lognormal identity tested against the
//! Green-table diagonal.

use thiserror::Error;

use crate::field::{GridField, GridSpec};
use crate::scalar::Scalar;
use crate::util::CompensatedSum;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("gamma = {0} outside the subcritical range [0, 2)")]
    GammaRange(f64),
    #[error("region {0} contains no grid nodes")]
    EmptyRegion(&'static str),
    #[error("field/spec mismatch: {0}")]
    Mismatch(String),
}

/// A named sub-domain of the unit square, resolved to grid cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    All,
    LeftHalf,
    BottomHalf,
    /// Quadrants numbered 0..4 in reading order: (left,bottom), (right,bottom),
    /// (left,top), (right,top).
    Quadrant(u8),
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::All => "all",
            Region::LeftHalf => "left-half",
            Region::BottomHalf => "bottom-half",
            Region::Quadrant(0) => "quadrant-00",
            Region::Quadrant(1) => "quadrant-10",
            Region::Quadrant(2) => "quadrant-01",
            Region::Quadrant(3) => "quadrant-11",
            Region::Quadrant(_) => "quadrant-invalid",
        }
    }

    /// Does cell (ix, iy) of an n-grid lie in the region? Cells are assigned
    /// by node position; the half/quadrant cuts are at 1/2.
    pub fn contains(self, ix: usize, iy: usize, n: usize) -> bool {
        let half = |i: usize| 2 * (i + 1) <= n + 1; // position (i+1)/(n+1) ≤ 1/2
        match self {
            Region::All => true,
            Region::LeftHalf => half(ix),
            Region::BottomHalf => half(iy),
            Region::Quadrant(0) => half(ix) && half(iy),
            Region::Quadrant(1) => !half(ix) && half(iy),
            Region::Quadrant(2) => half(ix) && !half(iy),
            Region::Quadrant(3) => !half(ix) && !half(iy),
            Region::Quadrant(_) => false,
        }
    }
}

/// Cell masses of the Liouville measure built from one field sample.
#[derive(Clone, Debug)]
pub struct LiouvilleMeasure<T> {
    pub spec: GridSpec,
    pub gamma: T,
    mass: Vec<T>,
    total: T,
}

impl<T: Scalar> LiouvilleMeasure<T> {
    #[inline]
    pub fn cell(&self, ix: usize, iy: usize) -> T {
        self.mass[self.spec.index(ix, iy)]
    }

    pub fn cells(&self) -> &[T] {
        &self.mass
    }

    /// μ̂(D): total mass of the unit square.
    pub fn total(&self) -> T {
        self.total
    }

    /// Same measure with every cell multiplied by `factor` (> 0). Used to
    /// probe how the eigenproblem responds to a global mass rescaling.
    pub fn scaled(&self, factor: T) -> Result<Self, MeasureError> {
        if !(factor > T::zero()) || !factor.is_finite() {
            return Err(MeasureError::Mismatch(format!(
                "scale factor must be positive and finite, got {:e}",
                factor.to_f64()
            )));
        }
        Ok(LiouvilleMeasure {
            spec: self.spec,
            gamma: self.gamma,
            mass: self.mass.iter().map(|&m| m * factor).collect(),
            total: self.total * factor,
        })
    }

    /// Mass of a region (compensated sum over its cells).
    pub fn region_mass(&self, region: Region) -> Result<T, MeasureError> {
        let n = self.spec.n;
        let mut acc = CompensatedSum::new();
        let mut hit = false;
        for iy in 0..n {
            for ix in 0..n {
                if region.contains(ix, iy, n) {
                    acc.add(self.cell(ix, iy));
                    hit = true;
                }
            }
        }
        if !hit {
            return Err(MeasureError::EmptyRegion(region.label()));
        }
        Ok(acc.value())
    }
}

impl<T: Scalar> LiouvilleMeasure<T> {
    /// Reassemble a measure from stored cell masses (file reads). The total
    /// is recomputed with the same compensated sum `build_measure` uses, so
    /// a write/read roundtrip reproduces it bit for bit.
    pub(crate) fn from_cells(
        spec: GridSpec,
        gamma: T,
        mass: Vec<T>,
    ) -> Result<Self, MeasureError> {
        if !(gamma >= T::zero() && gamma < T::of(2.0)) || !gamma.is_finite() {
            return Err(MeasureError::GammaRange(gamma.to_f64()));
        }
        if mass.len() != spec.n * spec.n {
            return Err(MeasureError::Mismatch(format!(
                "expected {} cells for n = {}, got {}",
                spec.n * spec.n,
                spec.n,
                mass.len()
            )));
        }
        let mut acc = CompensatedSum::new();
        for &m in &mass {
            if !(m > T::zero()) || !m.is_finite() {
                return Err(MeasureError::Mismatch(
                    "cell masses must be positive and finite".into(),
                ));
            }
            acc.add(m);
        }
        Ok(LiouvilleMeasure { spec, gamma, mass, total: acc.value() })
    }
}

/// Build μ̂ from a field sample. γ must lie in [0, 2) (subcritical chaos);
/// γ = 0 yields the exact uniform a² per cell.
pub fn build_measure<T: Scalar>(
    field: &GridField<T>,
    gamma: T,
) -> Result<LiouvilleMeasure<T>, MeasureError> {
    if !(gamma >= T::zero() && gamma < T::of(2.0)) || !gamma.is_finite() {
        return Err(MeasureError::GammaRange(gamma.to_f64()));
    }
    let spec = field.spec;
    let a = spec.spacing::<T>();
    let n = spec.n;
    let mut mass = vec![T::zero(); n * n];
    let mut acc = CompensatedSum::new();
    if gamma == T::zero() {
        let cell = a * a;
        for m in mass.iter_mut() {
            *m = cell;
            acc.add(cell);
        }
    } else {
        // a^{2+γ²/2} via exp/log: a is exact for these grids only when n+1
        // is a power of two, so go through ln either way.
        let weight = ((T::of(2.0) + gamma * gamma / T::of(2.0)) * a.ln()).exp();
        for (m, &h) in mass.iter_mut().zip(field.values()) {
            *m = weight * (gamma * h).exp();
            acc.add(*m);
        }
    }
    Ok(LiouvilleMeasure { spec, gamma, mass, total: acc.value() })
}

/// Expected cell mass under the field law: a^{2+γ²/2}·e^{(γ²/2)·V(v)}.
pub fn expected_cell_mass<T: Scalar>(spec: &GridSpec, gamma: T, variance: T) -> T {
    let a = spec.spacing::<T>();
    ((T::of(2.0) + gamma * gamma / T::of(2.0)) * a.ln() + gamma * gamma / T::of(2.0) * variance)
        .exp()
}

/// Rebuild with the field shifted by a constant: μ̂ scales by e^{γc} exactly.
pub fn shifted_measure<T: Scalar>(
    field: &GridField<T>,
    gamma: T,
    shift: T,
) -> Result<LiouvilleMeasure<T>, MeasureError> {
    build_measure(&field.shifted(shift), gamma)
}
