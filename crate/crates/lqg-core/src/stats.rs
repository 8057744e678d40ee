//! Eigenvalue statistics: Weyl-law fits, unfolded nearest-neighbour spacings
//! against the Wigner surmise, subleading-correction exponents, and
//! quantum-ergodicity (QUE) overlap diagnostics.
//!
//! Everything here consumes an already-computed ascending spectrum; the
//! unfolding constant c_γ·μ̂(D) is passed in explicitly so the module stays
//! decoupled from how the measure was produced.

use std::f64::consts::PI;

use thiserror::Error;

use crate::gmc::{LiouvilleMeasure, Region};
use crate::scalar::Scalar;
use crate::spectral::Spectrum;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("gamma = {0} outside [0, 2)")]
    GammaDomain(f64),
    #[error("invalid index window: {0}")]
    Window(String),
    #[error("need at least {need} usable points, found {found}")]
    InsufficientData { need: usize, found: usize },
    #[error("spectrum carries no eigenvectors")]
    MissingVectors,
    #[error("{0}")]
    Mismatch(String),
}

/// Weyl constant for the Liouville Brownian motion counting function,
/// N(λ) ≈ c_γ · μ̂(D) · λ with c_γ = 1/(π(2 − γ²/2)). Defined for γ ∈ [0, 2);
/// the constant diverges at γ = 2.
pub fn c_gamma<T: Scalar>(gamma: T) -> Result<T, StatsError> {
    let g = gamma.to_f64();
    if !g.is_finite() || !(0.0..2.0).contains(&g) {
        return Err(StatsError::GammaDomain(g));
    }
    Ok(T::one() / (T::of(PI) * (T::of(2.0) - gamma * gamma * T::of(0.5))))
}

/// N(λ) = #{λ_n ≤ λ} (inclusive) for an ascending eigenvalue list.
pub fn counting_function<T: Scalar>(eigenvalues: &[T], lambda: T) -> usize {
    debug_assert!(eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    eigenvalues.partition_point(|&l| l <= lambda)
}

/// 1-based inclusive eigenvalue index range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexWindow {
    pub lo: usize,
    pub hi: usize,
}

impl IndexWindow {
    pub fn new(lo: usize, hi: usize) -> Result<Self, StatsError> {
        if lo < 1 || hi <= lo {
            return Err(StatsError::Window(format!("({lo}, {hi}) is not a 1-based range")));
        }
        Ok(IndexWindow { lo, hi })
    }

    fn check_len(&self, len: usize) -> Result<(), StatsError> {
        if self.hi > len {
            return Err(StatsError::Window(format!(
                "window ({}, {}) exceeds spectrum length {len}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct WeylFit<T> {
    /// Least-squares slope of j against λ_j through the origin.
    pub slope: T,
    pub window: IndexWindow,
    /// RMS of the count residuals j − slope·λ_j over the window.
    pub residual_rms: T,
    /// The predicted constant c_γ·μ̂(D) the slope should approach.
    pub reference: T,
}

/// Fit N(λ) = slope·λ through the origin over an index window deep enough to
/// be in the asymptotic regime: lo ≥ 100 and at least 50 eigenvalues.
pub fn weyl_fit<T: Scalar>(
    eigenvalues: &[T],
    window: IndexWindow,
    reference: T,
) -> Result<WeylFit<T>, StatsError> {
    if window.lo < 100 {
        return Err(StatsError::Window(format!(
            "window starts at {} but the fit needs lo ≥ 100",
            window.lo
        )));
    }
    if window.hi - window.lo < 50 {
        return Err(StatsError::Window(format!(
            "window ({}, {}) spans fewer than 50 eigenvalues",
            window.lo, window.hi
        )));
    }
    window.check_len(eigenvalues.len())?;
    let mut num = T::zero();
    let mut den = T::zero();
    for j in window.lo..=window.hi {
        let lam = eigenvalues[j - 1];
        num += T::of(j as f64) * lam;
        den += lam * lam;
    }
    let slope = num / den;
    let mut ss = T::zero();
    for j in window.lo..=window.hi {
        let r = T::of(j as f64) - slope * eigenvalues[j - 1];
        ss += r * r;
    }
    let count = T::of((window.hi - window.lo + 1) as f64);
    Ok(WeylFit { slope, window, residual_rms: (ss / count).sqrt(), reference })
}

/// Wigner surmise CDF F(s) = 1 − exp(−πs²/4) (GOE nearest-neighbour guess).
pub fn wigner_cdf<T: Scalar>(s: T) -> T {
    T::one() - (-T::of(PI / 4.0) * s * s).exp()
}

#[derive(Clone, Debug)]
pub struct SpacingStats<T> {
    /// Unfolded gaps s_j = unfold·(λ_{j+1} − λ_j), window order.
    pub gaps: Vec<T>,
    /// Sorted gaps: the jump points of the empirical CDF.
    pub ecdf_grid: Vec<T>,
    /// Right-continuous empirical CDF value at each grid point.
    pub ecdf: Vec<T>,
    pub mean_gap: T,
    /// Exact Kolmogorov–Smirnov distance to the Wigner surmise.
    pub ks_vs_wigner: T,
}

/// Unfolded spacing statistics over a window of at least 200 gaps.
/// `unfold` is the mean-density constant c_γ·μ̂(D).
pub fn spacing_stats<T: Scalar>(
    eigenvalues: &[T],
    window: IndexWindow,
    unfold: T,
) -> Result<SpacingStats<T>, StatsError> {
    let n_gaps = window.hi - window.lo;
    if n_gaps < 200 {
        return Err(StatsError::Window(format!(
            "window ({}, {}) yields {n_gaps} gaps; spacing statistics need ≥ 200",
            window.lo, window.hi
        )));
    }
    window.check_len(eigenvalues.len())?;
    if !(unfold > T::zero()) {
        return Err(StatsError::Mismatch("unfolding constant must be positive".into()));
    }
    let mut gaps = Vec::with_capacity(n_gaps);
    for j in window.lo..window.hi {
        gaps.push(unfold * (eigenvalues[j] - eigenvalues[j - 1]));
    }
    let mut grid = gaps.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = T::of(n_gaps as f64);
    let mut ks = T::zero();
    let mut ecdf = Vec::with_capacity(n_gaps);
    for (i, &s) in grid.iter().enumerate() {
        let hi = T::of((i + 1) as f64) / n;
        let lo = T::of(i as f64) / n;
        let f = wigner_cdf(s);
        for d in [(hi - f).abs(), (lo - f).abs()] {
            if d > ks {
                ks = d;
            }
        }
        ecdf.push(hi);
    }
    let mean_gap = gaps.iter().fold(T::zero(), |a, &b| a + b) / n;
    Ok(SpacingStats { gaps, ecdf_grid: grid, ecdf, mean_gap, ks_vs_wigner: ks })
}

#[derive(Clone, Debug)]
pub struct SubleadingFit<T> {
    /// Fitted exponent b of |reference·λ_j − j| ≈ A·λ_j^b; None when the
    /// deviations sit at round-off (nothing to fit).
    pub exponent: Option<T>,
    pub amplitude: Option<T>,
    pub points: usize,
    pub degenerate: bool,
}

/// Log-log fit of the counting-function deviation |reference·λ_j − j| over a
/// window. Deviations below round-off are excluded; if everything is at
/// round-off the fit is flagged degenerate instead of inventing an exponent.
pub fn subleading_fit<T: Scalar>(
    eigenvalues: &[T],
    reference: T,
    window: IndexWindow,
) -> Result<SubleadingFit<T>, StatsError> {
    window.check_len(eigenvalues.len())?;
    let mut pts: Vec<(T, T)> = Vec::new();
    let mut max_dev = T::zero();
    for j in window.lo..=window.hi {
        let lam = eigenvalues[j - 1];
        let dev = (reference * lam - T::of(j as f64)).abs();
        if dev > max_dev {
            max_dev = dev;
        }
        if dev > T::of(1e-12) * T::of(j as f64) {
            pts.push((lam.ln(), dev.ln()));
        }
    }
    if max_dev <= T::of(1e-8) * T::of(window.hi as f64) {
        return Ok(SubleadingFit { exponent: None, amplitude: None, points: 0, degenerate: true });
    }
    if pts.len() < 50 {
        return Err(StatsError::InsufficientData { need: 50, found: pts.len() });
    }
    let n = T::of(pts.len() as f64);
    let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &(x, y) in &pts {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    Ok(SubleadingFit {
        exponent: Some(slope),
        amplitude: Some(intercept.exp()),
        points: pts.len(),
        degenerate: false,
    })
}

#[derive(Clone, Debug)]
pub struct QueRow<T> {
    /// 0-based eigenvector index.
    pub n: usize,
    pub region: Region,
    /// O_n(A) = Σ_{v∈A} f_n(v)² μ̂(v).
    pub overlap: T,
    /// μ̂(A)/μ̂(D): the equidistribution target.
    pub target: T,
    /// Inverse participation ratio Σ_v (f_n(v)² μ̂(v))².
    pub ipr: T,
}

/// Quantum-ergodicity overlaps of eigenvectors with a region, plus inverse
/// participation ratios. Requires a spectrum solved with vectors.
pub fn que_overlap<T: Scalar>(
    spectrum: &Spectrum<T>,
    measure: &LiouvilleMeasure<T>,
    region: Region,
    indices: &[usize],
) -> Result<Vec<QueRow<T>>, StatsError> {
    if !spectrum.has_vectors() {
        return Err(StatsError::MissingVectors);
    }
    if spectrum.spec != measure.spec {
        return Err(StatsError::Mismatch("spectrum and measure use different grids".into()));
    }
    let region_mass = measure
        .region_mass(region)
        .map_err(|e| StatsError::Mismatch(e.to_string()))?;
    let target = region_mass / measure.total();
    let n_grid = spectrum.spec.n;
    let mut rows = Vec::with_capacity(indices.len());
    for &idx in indices {
        if idx >= spectrum.k() {
            return Err(StatsError::Mismatch(format!(
                "eigenvector index {idx} out of range (k = {})",
                spectrum.k()
            )));
        }
        let f = spectrum.eigenvector(idx).expect("vectors present");
        let mut overlap = T::zero();
        let mut ipr = T::zero();
        for iy in 0..n_grid {
            for ix in 0..n_grid {
                let v = iy * n_grid + ix;
                let w = f[v] * f[v] * measure.cell(ix, iy);
                ipr += w * w;
                if region.contains(ix, iy, n_grid) {
                    overlap += w;
                }
            }
        }
        rows.push(QueRow { n: idx, region, overlap, target, ipr });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridField, GridSpec};
    use crate::gmc::build_measure;
    use crate::spectral::{assemble_pair, solve_spectrum_opts, SolveOpts};

    #[test]
    fn weyl_constant_frozen_values() {
        // c_0 = 1/(2π); c_{1/2} = 1/(1.875π); c at γ² = 8/3 is 3/(2π)
        assert!((c_gamma(0.0f64).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((c_gamma(0.5f64).unwrap() - 1.0 / (1.875 * PI)).abs() < 1e-15);
        let g = (8.0f64 / 3.0).sqrt();
        assert!((c_gamma(g).unwrap() - 3.0 / (2.0 * PI)).abs() < 1e-14);
        assert!(matches!(c_gamma(2.0f64), Err(StatsError::GammaDomain(_))));
        assert!(matches!(c_gamma(2.4f64), Err(StatsError::GammaDomain(_))));
        assert!(matches!(c_gamma(-0.1f64), Err(StatsError::GammaDomain(_))));
    }

    #[test]
    fn counting_is_inclusive() {
        let ev = [1.0, 2.0, 2.0, 3.0];
        assert_eq!(counting_function(&ev, 2.0), 3);
        assert_eq!(counting_function(&ev, 1.9), 1);
        assert_eq!(counting_function(&ev, 3.0), 4);
        assert_eq!(counting_function(&ev, 0.5), 0);
    }

    #[test]
    fn weyl_fit_recovers_exact_linear_counts() {
        let c = 0.37;
        let ev: Vec<f64> = (1..=400).map(|j| j as f64 / c).collect();
        let w = IndexWindow::new(100, 400).unwrap();
        let fit = weyl_fit(&ev, w, c).unwrap();
        assert!((fit.slope - c).abs() < 1e-14);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn weyl_fit_tracks_subleading_bias() {
        // j = cλ − 0.3 λ^{1/4}: slope fitted over a deep window stays within
        // 1% of c even with the correction present.
        let c = 1.0;
        let ev: Vec<f64> = (1..=600).map(|j| invert_count(j as f64, c)).collect();
        let fit = weyl_fit(&ev, IndexWindow::new(200, 600).unwrap(), c).unwrap();
        assert!((fit.slope - c).abs() / c < 0.01, "slope {}", fit.slope);
    }

    #[test]
    fn weyl_fit_window_preconditions() {
        let ev: Vec<f64> = (1..=400).map(|j| j as f64).collect();
        assert!(matches!(
            weyl_fit(&ev, IndexWindow::new(99, 200).unwrap(), 1.0),
            Err(StatsError::Window(_))
        ));
        assert!(matches!(
            weyl_fit(&ev, IndexWindow::new(100, 149).unwrap(), 1.0),
            Err(StatsError::Window(_))
        ));
        assert!(matches!(
            weyl_fit(&ev, IndexWindow::new(100, 401).unwrap(), 1.0),
            Err(StatsError::Window(_))
        ));
        assert!(IndexWindow::new(0, 10).is_err());
        assert!(IndexWindow::new(10, 10).is_err());
    }

    #[test]
    fn wigner_cdf_frozen_points() {
        // F(1) = 1 − e^{−π/4} and F(2) = 1 − e^{−π}, digits frozen
        assert!((wigner_cdf(1.0f64) - 0.544_061_872_234_003_8).abs() < 1e-15);
        assert!((wigner_cdf(2.0f64) - 0.956_786_081_736_227_7).abs() < 1e-15);
        assert_eq!(wigner_cdf(0.0f64), 0.0);
    }

    #[test]
    fn rigid_spectrum_ks_is_wigner_at_one() {
        // Perfectly rigid spectrum: every unfolded gap is exactly 1, the ECDF
        // is a unit step there, and the KS distance is F(1) = 0.5440619.
        let c = 2.0;
        let ev: Vec<f64> = (1..=500).map(|j| j as f64 / c).collect();
        let s = spacing_stats(&ev, IndexWindow::new(1, 401).unwrap(), c).unwrap();
        assert_eq!(s.gaps.len(), 400);
        assert!((s.mean_gap - 1.0).abs() < 1e-12);
        assert!((s.ks_vs_wigner - 0.544_061_872_234_003_8).abs() < 1e-12);
    }

    #[test]
    fn spacing_needs_two_hundred_gaps() {
        let ev: Vec<f64> = (1..=300).map(|j| j as f64).collect();
        assert!(matches!(
            spacing_stats(&ev, IndexWindow::new(1, 150).unwrap(), 1.0),
            Err(StatsError::Window(_))
        ));
    }

    fn invert_count(j: f64, c: f64) -> f64 {
        // Newton solve of cλ − 0.3 λ^{1/4} = j
        let mut lam = (j + 1.0) / c;
        for _ in 0..40 {
            let f = c * lam - 0.3 * lam.powf(0.25) - j;
            let df = c - 0.075 * lam.powf(-0.75);
            lam -= f / df;
        }
        lam
    }

    #[test]
    fn subleading_recovers_synthetic_exponent() {
        let c = 0.16; // realistic density scale
        let ev: Vec<f64> = (1..=1200).map(|j| invert_count(j as f64, c)).collect();
        let fit = subleading_fit(&ev, c, IndexWindow::new(100, 1200).unwrap()).unwrap();
        assert!(!fit.degenerate);
        let b = fit.exponent.unwrap();
        assert!((b - 0.25).abs() < 0.05, "exponent {b}");
        assert!(fit.points >= 1000);
    }

    #[test]
    fn subleading_flags_degenerate_input() {
        let c = 0.75;
        let ev: Vec<f64> = (1..=400).map(|j| j as f64 / c).collect();
        let fit = subleading_fit(&ev, c, IndexWindow::new(1, 400).unwrap()).unwrap();
        assert!(fit.degenerate);
        assert!(fit.exponent.is_none());
    }

    #[test]
    fn que_quadrant_overlaps_partition_unity() {
        let n = 15;
        let spec = GridSpec::new(n, 0).unwrap();
        let h = GridField::from_values(spec, vec![0.0; n * n]).unwrap();
        let mu = build_measure(&h, 0.0).unwrap();
        let pair = assemble_pair(&mu);
        let opts = SolveOpts { vectors: true, tol: 1e-8, ..SolveOpts::new(6) };
        let s = solve_spectrum_opts(&pair, &opts).unwrap();
        let idx = [0usize, 1, 5];
        let mut totals = vec![0.0f64; idx.len()];
        let mut target_total = 0.0;
        for q in 0..4u8 {
            let rows = que_overlap(&s, &mu, Region::Quadrant(q), &idx).unwrap();
            for (i, r) in rows.iter().enumerate() {
                totals[i] += r.overlap;
                if i == 0 {
                    target_total += r.target;
                }
                assert!(r.ipr > 0.0);
            }
        }
        // quadrants partition the grid, eigenvectors are μ-normalized
        for t in totals {
            assert!((t - 1.0).abs() < 1e-10, "overlap sum {t}");
        }
        assert!((target_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn que_requires_vectors_and_matching_grid() {
        let n = 9;
        let spec = GridSpec::new(n, 0).unwrap();
        let h = GridField::from_values(spec, vec![0.0; n * n]).unwrap();
        let mu = build_measure(&h, 0.0).unwrap();
        let pair = assemble_pair(&mu);
        let s = solve_spectrum_opts(&pair, &SolveOpts::new(4)).unwrap();
        assert!(matches!(
            que_overlap(&s, &mu, Region::All, &[0]),
            Err(StatsError::MissingVectors)
        ));
        let opts = SolveOpts { vectors: true, ..SolveOpts::new(4) };
        let s = solve_spectrum_opts(&pair, &opts).unwrap();
        assert!(matches!(
            que_overlap(&s, &mu, Region::All, &[7]),
            Err(StatsError::Mismatch(_))
        ));
        let other = GridSpec::new(7, 0).unwrap();
        let h2 = GridField::from_values(other, vec![0.0; 49]).unwrap();
        let mu2 = build_measure(&h2, 0.0).unwrap();
        assert!(matches!(
            que_overlap(&s, &mu2, Region::All, &[0]),
            Err(StatsError::Mismatch(_))
        ));
    }
}
