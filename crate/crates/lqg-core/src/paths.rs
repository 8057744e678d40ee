//! Path-space Monte Carlo: planar Brownian bridges with an exact running-max
//! law, the drifted Brownian motion conditioned to stay nonnegative (sampled
//! by Williams time reversal, cross-checked by an h-transform SDE), the
//! two-sided process behind the cone constant c(γ, m) = 1/(πγm), and the
//! Liouville clock of a planar path against a cell measure.
//!
//! Everything is seeded and deterministic: estimators derive one RNG
//! substream per path so the reported mean does not depend on evaluation
//! order or on how many draws an individual path consumed.

use rand::Rng;
use thiserror::Error;

use crate::gmc::LiouvilleMeasure;
use crate::rng;
use crate::scalar::Scalar;
use crate::util::mean_stderr;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("first-passage cap exceeded heading for level {level}: {steps} steps")]
    CapExceeded { level: f64, steps: usize },
    #[error("path kind mismatch: expected {0}")]
    KindMismatch(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    BmDrift,
    Bridge2d,
    Conditioned,
    BetaTwoSided,
}

#[derive(Clone, Debug)]
pub enum PathValues<T> {
    Scalar(Vec<T>),
    Planar(Vec<[T; 2]>),
}

impl<T> PathValues<T> {
    pub fn len(&self) -> usize {
        match self {
            PathValues::Scalar(v) => v.len(),
            PathValues::Planar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct PathParams<T> {
    pub m: T,
    pub level: T,
    pub duration: Option<T>,
    /// Index of t = 0 in `values`; two-sided paths put it mid-array.
    pub origin_index: usize,
}

#[derive(Clone, Debug)]
pub struct PathSample<T> {
    pub dt: T,
    pub values: PathValues<T>,
    pub kind: PathKind,
    pub params: PathParams<T>,
}

/// A Monte Carlo scalar with its standard error, the parameters that
/// produced it, and the value it is meant to approach (when known).
#[derive(Clone, Debug)]
pub struct MCEstimate<T> {
    pub mean: T,
    pub stderr: T,
    pub n_paths: usize,
    pub params: Vec<(&'static str, T)>,
    pub target: Option<T>,
}

fn check_dt<T: Scalar>(dt: T) -> Result<(), PathError> {
    if !(dt > T::zero()) || !(dt <= T::of(1e-3)) || !dt.is_finite() {
        return Err(PathError::InvalidInput(format!(
            "dt must lie in (0, 1e-3], got {:e}",
            dt.to_f64()
        )));
    }
    Ok(())
}

fn check_positive<T: Scalar>(name: &str, v: T) -> Result<(), PathError> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(PathError::InvalidInput(format!(
            "{name} must be positive and finite, got {:e}",
            v.to_f64()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bridges

/// Planar Brownian bridge of duration `ell` pinned to `anchor` at both ends,
/// on a uniform grid of `steps` intervals. Endpoints equal the anchor
/// exactly (the construction W_s − (s/ℓ)W_ℓ is evaluated so the cancellation
/// at s ∈ {0, ℓ} is literal).
pub fn sample_bridge2d<T: Scalar>(
    anchor: [T; 2],
    ell: T,
    steps: usize,
    seed: u64,
) -> Result<PathSample<T>, PathError> {
    if steps < 2 {
        return Err(PathError::InvalidInput(format!("steps must be ≥ 2, got {steps}")));
    }
    check_positive("duration", ell)?;
    if !(anchor[0].is_finite() && anchor[1].is_finite()) {
        return Err(PathError::InvalidInput("anchor must be finite".into()));
    }
    let mut rng = rng::master(seed);
    let dt = ell / T::of_usize(steps);
    let sdt = dt.sqrt();
    let mut pts = vec![[T::zero(); 2]; steps + 1];
    let mut w = [T::zero(); 2];
    for p in pts.iter_mut().skip(1) {
        for (c, wc) in w.iter_mut().enumerate() {
            *wc = *wc + sdt * T::standard_normal(&mut rng);
            p[c] = *wc;
        }
    }
    let end = pts[steps];
    for (j, p) in pts.iter_mut().enumerate() {
        let frac = T::of_usize(j) / T::of_usize(steps);
        for c in 0..2 {
            p[c] = p[c] - frac * end[c] + anchor[c];
        }
    }
    Ok(PathSample {
        dt,
        values: PathValues::Planar(pts),
        kind: PathKind::Bridge2d,
        params: PathParams {
            m: T::zero(),
            level: T::zero(),
            duration: Some(ell),
            origin_index: 0,
        },
    })
}

/// P(max of a scalar Brownian bridge on [0, ℓ] ≥ k), estimated with the
/// exact law: conditional on the skeleton, each interval's maximum is drawn
/// from its known distribution, M = [(x₀+x₁) + √((x₀−x₁)² + 4c)]/2 with
/// c = −dt·ln U/2. The estimate is therefore unbiased at any step count;
/// refining `steps` only re-partitions the same law. Target: e^{−2k²/ℓ}.
pub fn bridge_max_exceed_prob<T: Scalar>(
    k: T,
    ell: T,
    steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MCEstimate<T>, PathError> {
    check_positive("threshold", k)?;
    check_positive("duration", ell)?;
    if steps < 2 {
        return Err(PathError::InvalidInput(format!("steps must be ≥ 2, got {steps}")));
    }
    if n_samples < 2 {
        return Err(PathError::InvalidInput("need at least 2 samples".into()));
    }
    let dt = ell / T::of_usize(steps);
    let sdt = dt.sqrt();
    let mut w = vec![T::zero(); steps + 1];
    let mut hits = 0usize;
    for i in 0..n_samples {
        let mut rng = rng::substream(seed, i as u64);
        let mut acc = T::zero();
        for wj in w.iter_mut().skip(1) {
            acc = acc + sdt * T::standard_normal(&mut rng);
            *wj = acc;
        }
        let end = w[steps];
        let mut exceeded = false;
        for j in 0..steps {
            let f0 = T::of_usize(j) / T::of_usize(steps);
            let f1 = T::of_usize(j + 1) / T::of_usize(steps);
            let x0 = w[j] - f0 * end;
            let x1 = w[j + 1] - f1 * end;
            let u = 1.0 - rng.random::<f64>(); // (0, 1]
            let c = dt * T::of(-0.5 * u.ln());
            let d = x0 - x1;
            let max = ((x0 + x1) + (d * d + T::of(4.0) * c).sqrt()) / T::of(2.0);
            if max >= k {
                exceeded = true;
                break;
            }
        }
        hits += exceeded as usize;
    }
    let n = T::of_usize(n_samples);
    let p = T::of_usize(hits) / n;
    let stderr = (p * (T::one() - p) / n).sqrt();
    Ok(MCEstimate {
        mean: p,
        stderr,
        n_paths: n_samples,
        params: vec![("k", k), ("ell", ell)],
        target: Some((T::of(-2.0) * k * k / ell).exp()),
    })
}

/// Empirical P(max_s |b_s| ≤ u) for a planar bridge pinned at the origin,
/// evaluated on the skeleton (which can only overstate the stay
/// probability, so it is still a valid probe of the upper bound). The
/// `target` carries the bound min(1, 2u²/ℓ), not a limit value.
pub fn bridge_stay_prob2d<T: Scalar>(
    radius: T,
    ell: T,
    steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MCEstimate<T>, PathError> {
    check_positive("radius", radius)?;
    check_positive("duration", ell)?;
    if steps < 2 || n_samples < 2 {
        return Err(PathError::InvalidInput("steps ≥ 2 and n_samples ≥ 2 required".into()));
    }
    let r2 = radius * radius;
    let dt = ell / T::of_usize(steps);
    let sdt = dt.sqrt();
    let mut w = vec![[T::zero(); 2]; steps + 1];
    let mut stays = 0usize;
    for i in 0..n_samples {
        let mut rng = rng::substream(seed, i as u64);
        let mut acc = [T::zero(); 2];
        for wj in w.iter_mut().skip(1) {
            for (c, a) in acc.iter_mut().enumerate() {
                *a = *a + sdt * T::standard_normal(&mut rng);
                wj[c] = *a;
            }
        }
        let end = w[steps];
        let mut inside = true;
        for (j, wj) in w.iter().enumerate() {
            let f = T::of_usize(j) / T::of_usize(steps);
            let bx = wj[0] - f * end[0];
            let by = wj[1] - f * end[1];
            if bx * bx + by * by > r2 {
                inside = false;
                break;
            }
        }
        stays += inside as usize;
    }
    let n = T::of_usize(n_samples);
    let p = T::of_usize(stays) / n;
    let stderr = (p * (T::one() - p) / n).sqrt();
    let bound_raw = T::of(2.0) * r2 / ell;
    let bound = if bound_raw < T::one() { bound_raw } else { T::one() };
    Ok(MCEstimate {
        mean: p,
        stderr,
        n_paths: n_samples,
        params: vec![("radius", radius), ("ell", ell)],
        target: Some(bound),
    })
}

// ---------------------------------------------------------------------------
// conditioned process (Williams reversal) and the two-sided process

/// Euler walk of B_t + m·t from 0 until it first reaches `level`. Returns
/// the crossing step index j* and the within-step fraction θ of the linearly
/// interpolated crossing; the walk itself is left in `fw` (fw[0] = 0).
fn forward_to_level<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    m: T,
    level: T,
    dt: T,
    fw: &mut Vec<T>,
) -> Result<(usize, T), PathError> {
    fw.clear();
    fw.push(T::zero());
    let cap = (T::of(10.0) * level / (m * dt)).to_f64().ceil() as usize + 1;
    let drift = m * dt;
    let sdt = dt.sqrt();
    let mut prev = T::zero();
    let mut j = 0usize;
    loop {
        j += 1;
        if j > cap {
            return Err(PathError::CapExceeded { level: level.to_f64(), steps: j });
        }
        let b = prev + drift + sdt * T::standard_normal(rng);
        fw.push(b);
        if b >= level {
            let theta = (level - prev) / (b - prev);
            return Ok((j, theta));
        }
        prev = b;
    }
}

/// One reversed value: the conditioned path at time j·dt back from the
/// interpolated crossing, V_j = level − [(1−θ)·fw[j*−1−j] + θ·fw[j*−j]].
#[inline]
fn reversed_value<T: Scalar>(fw: &[T], jstar: usize, theta: T, level: T, j: usize) -> T {
    if j == 0 {
        return T::zero(); // the interpolation at the crossing is exact by construction
    }
    level - ((T::one() - theta) * fw[jstar - 1 - j] + theta * fw[jstar - j])
}

/// Drifted Brownian motion conditioned to stay nonnegative, via Williams:
/// run B + m·t to its first passage of `level`, linearly interpolate the
/// crossing, and time-reverse; the result is the conditioned process run
/// until its last visit to `level`. Values sit on a uniform dt grid counted
/// from the (interpolated) crossing, plus one final entry pinned to `level`
/// at time `duration` — a partial step. values[0] = 0 exactly and every
/// value is ≥ 0 (the forward walk is below `level` before crossing).
pub fn sample_conditioned<T: Scalar>(
    m: T,
    level: T,
    dt: T,
    seed: u64,
) -> Result<PathSample<T>, PathError> {
    check_positive("m", m)?;
    check_positive("level", level)?;
    check_dt(dt)?;
    let mut rng = rng::master(seed);
    let mut fw = Vec::new();
    let (jstar, theta) = forward_to_level(&mut rng, m, level, dt, &mut fw)?;
    let mut values = Vec::with_capacity(jstar + 1);
    for j in 0..jstar {
        values.push(reversed_value(&fw, jstar, theta, level, j));
    }
    values.push(level);
    let duration = (T::of_usize(jstar - 1) + theta) * dt;
    Ok(PathSample {
        dt,
        values: PathValues::Scalar(values),
        kind: PathKind::Conditioned,
        params: PathParams { m, level, duration: Some(duration), origin_index: 0 },
    })
}

/// Secondary sampler for the conditioned process: Euler steps of the
/// h-transform SDE dX = m·coth(mX)dt + dB, realized as a Bessel(3) norm
/// update plus the bounded remainder r(x) = m·coth(mx) − 1/x ∈ [0, m). The
/// exact 3D-norm step absorbs the 1/x part of the drift, so the scheme is
/// stable from the near-zero start x₀ = 10⁻⁶. Returns the value at `t_end`.
pub fn htransform_terminal<T: Scalar>(m: T, t_end: T, dt: T, seed: u64) -> Result<T, PathError> {
    check_positive("m", m)?;
    check_positive("t_end", t_end)?;
    check_dt(dt)?;
    let steps = (t_end / dt).to_f64().round() as usize;
    if steps == 0 {
        return Err(PathError::InvalidInput("t_end shorter than one step".into()));
    }
    let mut rng = rng::master(seed);
    let sdt = dt.sqrt();
    let mut x = T::of(1e-6);
    for _ in 0..steps {
        let mx = m * x;
        let r = if mx < T::of(0.05) {
            // series for m·coth(mx) − 1/x near 0
            m * m * x / T::of(3.0) - m * m * m * m * x * x * x / T::of(45.0)
        } else {
            m / mx.tanh() - T::one() / x
        };
        let a = x + r * dt + sdt * T::standard_normal(&mut rng);
        let b = sdt * T::standard_normal(&mut rng);
        let c = sdt * T::standard_normal(&mut rng);
        x = (a * a + b * b + c * c).sqrt();
    }
    Ok(x)
}

/// Number of retries allowed when a conditioned path comes back shorter
/// than the requested horizon; each retry burns one substream index out of
/// the block of 8 reserved per path.
const COND_ATTEMPTS: u64 = 7;

/// Conditioned path on the uniform grid 0..=need, writing V_j into
/// out[need − j] (reversed placement for the negative side of β). Retries
/// with fresh substreams until the first-passage time exceeds the horizon;
/// the level is chosen by callers so a retry is a ~10⁻⁹ event.
fn conditioned_into<T: Scalar>(
    seed: u64,
    stream_base: u64,
    m: T,
    level: T,
    dt: T,
    need: usize,
    fw: &mut Vec<T>,
    out: &mut [T],
) -> Result<(), PathError> {
    debug_assert_eq!(out.len(), need + 1);
    for attempt in 0..COND_ATTEMPTS {
        let mut rng = rng::substream(seed, stream_base + attempt);
        let (jstar, theta) = forward_to_level(&mut rng, m, level, dt, fw)?;
        if jstar < need + 1 {
            continue; // path too short for the horizon; resample
        }
        for j in 0..=need {
            out[need - j] = reversed_value(fw, jstar, theta, level, j);
        }
        return Ok(());
    }
    Err(PathError::InvalidInput(format!(
        "conditioned path stayed shorter than the horizon {} times in a row",
        COND_ATTEMPTS
    )))
}

/// Level high enough that the conditioned walk's first passage almost
/// surely takes longer than `t_span` (six standard deviations of slack).
fn beta_level<T: Scalar>(m: T, t_span: T) -> T {
    m * t_span + T::of(6.0) * t_span.sqrt()
}

/// The two-sided process behind the cone constant, on [−T, T]: negative
/// times carry the conditioned (nonnegative) process, positive times an
/// independent B_t − m·t; β(0) = 0 exactly. The grid rounds T up to a whole
/// number of steps; `origin_index` marks t = 0.
pub fn sample_beta<T: Scalar>(
    m: T,
    t_span: T,
    dt: T,
    seed: u64,
) -> Result<PathSample<T>, PathError> {
    check_positive("m", m)?;
    check_positive("t_span", t_span)?;
    check_dt(dt)?;
    let k = (t_span / dt).to_f64().ceil() as usize;
    let t_grid = T::of_usize(k) * dt;
    let level = beta_level(m, t_grid);
    let mut values = vec![T::zero(); 2 * k + 1];
    let mut fw = Vec::new();
    conditioned_into(seed, 1, m, level, dt, k, &mut fw, &mut values[..=k])?;
    let mut rng = rng::substream(seed, 0);
    let sdt = dt.sqrt();
    let drift = m * dt;
    let mut b = T::zero();
    for v in values[k + 1..].iter_mut() {
        b = b + sdt * T::standard_normal(&mut rng) - drift;
        *v = b;
    }
    Ok(PathSample {
        dt,
        values: PathValues::Scalar(values),
        kind: PathKind::BetaTwoSided,
        params: PathParams { m, level, duration: Some(t_grid), origin_index: k },
    })
}

// ---------------------------------------------------------------------------
// cone-constant estimator

/// Functionals f admissible in the cone constant: any f with
/// ∫₀^∞ f(x)/x dx = 1 yields the same limit, because the two-sided process
/// spends expected time 1/m at every level.
#[derive(Clone, Copy)]
pub enum ConeFunctional<T> {
    /// f(x) = x·e^{−x}; smooth decay on both ends of the level range.
    Damped,
    /// f(x) = x·1{x ≤ 1}; hard cutoff at level 0.
    Truncated,
    /// Caller-supplied f; the caller owns the unit-normalization and any
    /// overflow guards for huge arguments.
    Custom(fn(T) -> T),
}

impl<T: Scalar> ConeFunctional<T> {
    pub fn label(&self) -> &'static str {
        match self {
            ConeFunctional::Damped => "damped",
            ConeFunctional::Truncated => "truncated",
            ConeFunctional::Custom(_) => "custom",
        }
    }

    /// Evaluate f(e^w) from the log argument w = γβ, with under/overflow
    /// cut at |w| = 42 where both built-ins are 0 to double precision.
    #[inline]
    fn eval_log(&self, w: T) -> T {
        let cut = T::of(42.0);
        match self {
            ConeFunctional::Damped => {
                if w < -cut || w > cut {
                    T::zero()
                } else {
                    let x = w.exp();
                    x * (-x).exp()
                }
            }
            ConeFunctional::Truncated => {
                if w > T::zero() || w < -cut {
                    T::zero()
                } else {
                    w.exp()
                }
            }
            ConeFunctional::Custom(f) => f(w.exp()),
        }
    }
}

/// Truncation horizon: the largest of the three tail scales 2·6.9/(γm),
/// 8·6.9/m², 4·6.9/(γm), so the mass outside [−T, T] is below the 10⁻³
/// relative level the exponential tail bounds give.
pub fn cone_horizon<T: Scalar>(gamma: T, m: T) -> T {
    let s = T::of(6.9);
    let a = T::of(2.0) * s / (gamma * m);
    let b = T::of(8.0) * s / (m * m);
    let c = T::of(4.0) * s / (gamma * m);
    let mut t = a;
    if b > t {
        t = b;
    }
    if c > t {
        t = c;
    }
    t
}

fn check_cone_args<T: Scalar>(gamma: T, m: T, dt: T, n_paths: usize) -> Result<(), PathError> {
    check_positive("gamma", gamma)?;
    check_positive("m", m)?;
    check_dt(dt)?;
    if n_paths < 2 {
        return Err(PathError::InvalidInput("need at least 2 paths".into()));
    }
    Ok(())
}

/// Per-path values of (1/π)∫_{−T}^{T} f(e^{γβ_t})dt, trapezoidal in t. The
/// path budget: substream 8i drives the free side of path i, 8i+1+a its
/// conditioned side (a counts retries).
pub fn cone_functional_paths<T: Scalar>(
    gamma: T,
    m: T,
    f: ConeFunctional<T>,
    dt: T,
    n_paths: usize,
    seed: u64,
    t_factor: T,
) -> Result<(Vec<T>, T), PathError> {
    check_cone_args(gamma, m, dt, n_paths)?;
    if !(t_factor > T::zero()) || !t_factor.is_finite() {
        return Err(PathError::InvalidInput("t_factor must be positive".into()));
    }
    let t_span = t_factor * cone_horizon(gamma, m);
    let k = (t_span / dt).to_f64().ceil() as usize;
    let t_grid = T::of_usize(k) * dt;
    let level = beta_level(m, t_grid);
    let sdt = dt.sqrt();
    let drift = m * dt;
    let inv_pi = T::one() / T::of(std::f64::consts::PI);
    let g_origin = f.eval_log(T::zero()); // f(1), shared endpoint of both halves
    let mut fw: Vec<T> = Vec::new();
    let mut vals = Vec::with_capacity(n_paths);
    for i in 0..n_paths {
        let base = (i as u64) * 8;
        // free side: trapezoid of f(e^{γ(B_t − mt)}) over [0, T]
        let mut rng = rng::substream(seed, base);
        let mut beta = T::zero();
        let mut acc = g_origin / T::of(2.0);
        let mut g_last = g_origin;
        for _ in 1..=k {
            beta = beta + sdt * T::standard_normal(&mut rng) - drift;
            g_last = f.eval_log(gamma * beta);
            acc = acc + g_last;
        }
        acc = acc - g_last / T::of(2.0);
        // conditioned side over [−T, 0], streamed straight off the reversal
        let mut attempt_ok = false;
        for attempt in 0..COND_ATTEMPTS {
            let mut crng = rng::substream(seed, base + 1 + attempt);
            let (jstar, theta) = forward_to_level(&mut crng, m, level, dt, &mut fw)?;
            if jstar < k + 1 {
                continue;
            }
            let mut g_far = g_origin;
            for j in 0..=k {
                let v = reversed_value(&fw, jstar, theta, level, j);
                g_far = f.eval_log(gamma * v);
                let w = if j == 0 { g_far / T::of(2.0) } else { g_far };
                acc = acc + w;
            }
            acc = acc - g_far / T::of(2.0);
            attempt_ok = true;
            break;
        }
        if !attempt_ok {
            return Err(PathError::InvalidInput(format!(
                "conditioned path stayed shorter than the horizon {} times in a row",
                COND_ATTEMPTS
            )));
        }
        vals.push(inv_pi * dt * acc);
    }
    Ok((vals, t_grid))
}

/// Monte Carlo estimate of c(γ, m) = (1/π)E∫ f(e^{γβ_t})dt = 1/(πγm).
pub fn estimate_cone_constant<T: Scalar>(
    gamma: T,
    m: T,
    f: ConeFunctional<T>,
    dt: T,
    n_paths: usize,
    seed: u64,
) -> Result<MCEstimate<T>, PathError> {
    estimate_cone_constant_scaled(gamma, m, f, dt, n_paths, seed, T::one())
}

/// Same estimator with the horizon multiplied by `t_factor`; used to verify
/// that the truncation tail is already negligible at t_factor = 1.
pub fn estimate_cone_constant_scaled<T: Scalar>(
    gamma: T,
    m: T,
    f: ConeFunctional<T>,
    dt: T,
    n_paths: usize,
    seed: u64,
    t_factor: T,
) -> Result<MCEstimate<T>, PathError> {
    let (vals, t_grid) = cone_functional_paths(gamma, m, f, dt, n_paths, seed, t_factor)?;
    let (mean, stderr) = mean_stderr(&vals);
    let pi = T::of(std::f64::consts::PI);
    Ok(MCEstimate {
        mean,
        stderr,
        n_paths,
        params: vec![("gamma", gamma), ("m", m), ("dt", dt), ("T", t_grid)],
        target: Some(T::one() / (pi * gamma * m)),
    })
}

// ---------------------------------------------------------------------------
// scale invariance of the truncated functional on the free half-line

/// Per-path values of (1/π)∫₀^∞ Ĩ(λ·e^{γ(B_t − mt)})dt for every λ in
/// `lambdas`, all λ sharing each path. Starting the exponential λ ≥ 1 high
/// only delays the first entry into {x ≤ 1}; by the strong Markov property
/// the expected value is the same for every λ, namely 1/(πγm). The horizon
/// is stretched by the descent time of the largest λ.
pub fn drift_functional_paths<T: Scalar>(
    gamma: T,
    m: T,
    lambdas: &[T],
    dt: T,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>, PathError> {
    check_cone_args(gamma, m, dt, n_paths)?;
    if lambdas.is_empty() {
        return Err(PathError::InvalidInput("need at least one lambda".into()));
    }
    let mut ln_max = T::zero();
    for &l in lambdas {
        if !(l >= T::one()) || !l.is_finite() {
            return Err(PathError::InvalidInput(format!(
                "lambda must be ≥ 1 (the shift identity starts at level ln λ/γ ≥ 0), got {:e}",
                l.to_f64()
            )));
        }
        if l.ln() > ln_max {
            ln_max = l.ln();
        }
    }
    let t_span = cone_horizon(gamma, m) + T::of(3.0) * ln_max / (gamma * m);
    let k = (t_span / dt).to_f64().ceil() as usize;
    let sdt = dt.sqrt();
    let drift = m * dt;
    let inv_pi = T::one() / T::of(std::f64::consts::PI);
    let nl = lambdas.len();
    let neg_ln: Vec<T> = lambdas.iter().map(|&l| -l.ln()).collect();
    let mut out = vec![Vec::with_capacity(n_paths); nl];
    let mut acc = vec![T::zero(); nl];
    let mut first = vec![T::zero(); nl];
    let mut last = vec![T::zero(); nl];
    for i in 0..n_paths {
        let mut rng = rng::substream(seed, i as u64);
        let mut beta = T::zero();
        for l in 0..nl {
            // Ĩ(λ·1) at the t = 0 endpoint: 1 when λ = 1, else 0
            first[l] = if neg_ln[l] >= T::zero() { T::one() } else { T::zero() };
            acc[l] = first[l];
            last[l] = first[l];
        }
        for _ in 1..=k {
            beta = beta + sdt * T::standard_normal(&mut rng) - drift;
            let gb = gamma * beta;
            let e_gb = if gb < T::of(-42.0) { T::zero() } else { gb.exp() };
            for l in 0..nl {
                // λ·e^{γβ} ≤ 1 ⟺ γβ ≤ −ln λ
                let g = if gb <= neg_ln[l] { lambdas[l] * e_gb } else { T::zero() };
                acc[l] = acc[l] + g;
                last[l] = g;
            }
        }
        for l in 0..nl {
            let trap = acc[l] - (first[l] + last[l]) / T::of(2.0);
            out[l].push(inv_pi * dt * trap);
        }
    }
    Ok(out)
}

/// One MCEstimate per λ, each targeting the λ-independent value 1/(πγm).
pub fn estimate_drift_functional<T: Scalar>(
    gamma: T,
    m: T,
    lambdas: &[T],
    dt: T,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<MCEstimate<T>>, PathError> {
    let per_lambda = drift_functional_paths(gamma, m, lambdas, dt, n_paths, seed)?;
    let pi = T::of(std::f64::consts::PI);
    let target = T::one() / (pi * gamma * m);
    Ok(per_lambda
        .into_iter()
        .zip(lambdas)
        .map(|(vals, &lam)| {
            let (mean, stderr) = mean_stderr(&vals);
            MCEstimate {
                mean,
                stderr,
                n_paths,
                params: vec![("gamma", gamma), ("m", m), ("dt", dt), ("lambda", lam)],
                target: Some(target),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Liouville clock

/// Time a planar path spends in D, weighted by the Liouville density: the
/// left-endpoint sum Σ dt·μ̂(cell(b_s))/a². Points outside the open unit
/// square contribute nothing.
pub fn liouville_clock<T: Scalar>(
    path: &PathSample<T>,
    measure: &LiouvilleMeasure<T>,
) -> Result<T, PathError> {
    let pts = match &path.values {
        PathValues::Planar(p) => p,
        PathValues::Scalar(_) => return Err(PathError::KindMismatch("planar path")),
    };
    if pts.len() < 2 {
        return Err(PathError::InvalidInput("path needs at least one step".into()));
    }
    check_positive("dt", path.dt)?;
    let a = measure.spec.spacing::<T>();
    let inv_a2 = T::one() / (a * a);
    let mut sum = T::zero();
    for p in &pts[..pts.len() - 1] {
        if let Some((ix, iy)) = measure.spec.nearest_cell(p[0], p[1]) {
            sum = sum + measure.cell(ix, iy);
        }
    }
    Ok(path.dt * sum * inv_a2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridField, GridSpec};
    use crate::gmc::build_measure;

    fn scalar_values(p: &PathSample<f64>) -> &[f64] {
        match &p.values {
            PathValues::Scalar(v) => v,
            _ => panic!("expected scalar path"),
        }
    }

    fn planar_values(p: &PathSample<f64>) -> &[[f64; 2]] {
        match &p.values {
            PathValues::Planar(v) => v,
            _ => panic!("expected planar path"),
        }
    }

    /// two-sample Kolmogorov distance
    fn ks_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let diff = (i as f64 / na - j as f64 / nb).abs();
            if diff > d {
                d = diff;
            }
        }
        d
    }

    /// conditioned value at t = j·dt, retrying seeds whose first passage
    /// came in under t
    fn conditioned_at(m: f64, level: f64, dt: f64, t_index: usize, seed: u64) -> f64 {
        let mut s = seed;
        loop {
            let path = sample_conditioned(m, level, dt, s).unwrap();
            let v = scalar_values(&path);
            if v.len() > t_index + 1 {
                return v[t_index];
            }
            s = s.wrapping_add(0x9e37_79b9);
        }
    }

    #[test]
    fn bridge_endpoints_are_exact() {
        for seed in 0..50u64 {
            let b = sample_bridge2d([0.3f64, 0.7], 1.0, 64, seed).unwrap();
            let pts = planar_values(&b);
            assert_eq!(pts[0], [0.3, 0.7]);
            assert_eq!(pts[64], [0.3, 0.7]);
        }
    }

    #[test]
    fn bridge_max_law_matches_exact_probability() {
        // P(max ≥ 1) on [0,1] is e^{−2}; the interval-max draws make the
        // estimator unbiased at any step count
        let n = 40_000;
        let est = bridge_max_exceed_prob(1.0f64, 1.0, 128, n, 7).unwrap();
        let target = est.target.unwrap();
        assert!((target - (-2.0f64).exp()).abs() < 1e-15);
        assert!(
            (est.mean - target).abs() <= 4.0 * est.stderr,
            "p = {} vs {} (se {})",
            est.mean,
            target,
            est.stderr
        );
        // refinement: 2× steps is the same law, so only MC noise moves
        let fine = bridge_max_exceed_prob(1.0f64, 1.0, 256, n, 8).unwrap();
        let se = (est.stderr.powi(2) + fine.stderr.powi(2)).sqrt();
        assert!((est.mean - fine.mean).abs() <= 4.0 * se);
    }

    #[test]
    fn bridge_stay_probability_respects_quadratic_bound() {
        for radius in [0.1f64, 0.3, 1.0] {
            let est = bridge_stay_prob2d(radius, 1.0, 256, 4000, 3).unwrap();
            let bound = est.target.unwrap();
            assert!(
                est.mean <= bound + 3.0 * est.stderr + 1e-12,
                "radius {radius}: {} > {}",
                est.mean,
                bound
            );
        }
    }

    #[test]
    fn conditioned_path_shape() {
        let p = sample_conditioned(1.0f64, 3.0, 1e-3, 42).unwrap();
        let v = scalar_values(&p);
        assert_eq!(v[0], 0.0);
        assert_eq!(*v.last().unwrap(), 3.0);
        assert!(v.iter().all(|&x| x >= 0.0));
        let dur = p.params.duration.unwrap();
        assert!(dur > 0.0 && ((v.len() - 2) as f64) * 1e-3 <= dur && dur <= (v.len() - 1) as f64 * 1e-3);
    }

    #[test]
    fn conditioned_dominates_free_drift() {
        // P(conditioned ≤ y) ≤ P(B_t + mt ≤ y) at (m, t, y) = (1, 1, 1)
        let n = 3000;
        let mut below_cond = 0usize;
        for s in 0..n {
            if conditioned_at(1.0, 8.0, 1e-3, 1000, 1000 + s as u64) <= 1.0 {
                below_cond += 1;
            }
        }
        let mut rng = rng::master(505);
        let mut below_free = 0usize;
        for _ in 0..n {
            if f64::standard_normal(&mut rng) + 1.0 <= 1.0 {
                below_free += 1;
            }
        }
        let (pc, pf) = (below_cond as f64 / n as f64, below_free as f64 / n as f64);
        let sigma = (2.0 * 0.25 / n as f64).sqrt();
        assert!(pc <= pf + 3.0 * sigma, "P_cond = {pc}, P_free = {pf}");
    }

    #[test]
    fn williams_matches_rejection_oracle() {
        // oracle: B + mt skeletons on [0, 8] that never dip below zero,
        // killed at the first negative value
        let m = 1.0f64;
        let dt_o = 2.5e-4f64;
        let horizon_steps = (8.0 / dt_o) as usize;
        let at = (1.0 / dt_o) as usize;
        let n = 10_000;
        let mut oracle = Vec::with_capacity(n);
        let mut stream = 0u64;
        let sdt = dt_o.sqrt();
        while oracle.len() < n {
            let mut rng = rng::substream(99, stream);
            stream += 1;
            let mut x = 0.0f64;
            let mut val_at = f64::NAN;
            let mut alive = true;
            for j in 1..=horizon_steps {
                x += m * dt_o + sdt * f64::standard_normal(&mut rng);
                if x < 0.0 {
                    alive = false;
                    break;
                }
                if j == at {
                    val_at = x;
                }
            }
            if alive {
                oracle.push(val_at);
            }
        }
        let mut williams: Vec<f64> =
            (0..n).map(|s| conditioned_at(m, 8.0, 1e-3, 1000, 7_000 + s as u64)).collect();
        let d = ks_distance(&mut oracle, &mut williams);
        assert!(d <= 0.02, "Kolmogorov distance {d}");
    }

    #[test]
    fn williams_matches_htransform_marginal() {
        let n = 8000;
        let mut ht: Vec<f64> =
            (0..n).map(|s| htransform_terminal(1.0f64, 1.0, 1e-3, 40_000 + s as u64).unwrap()).collect();
        let mut wi: Vec<f64> =
            (0..n).map(|s| conditioned_at(1.0, 8.0, 1e-3, 1000, 80_000 + s as u64)).collect();
        let d = ks_distance(&mut ht, &mut wi);
        assert!(d <= 0.03, "Kolmogorov distance {d}");
    }

    #[test]
    fn beta_process_shape_and_drift() {
        let p = sample_beta(1.0f64, 3.0, 1e-3, 11).unwrap();
        let v = scalar_values(&p);
        let k = p.params.origin_index;
        assert_eq!(v.len(), 2 * k + 1);
        assert_eq!(v[k], 0.0);
        assert!(v[..k].iter().all(|&x| x >= 0.0), "negative times must stay nonnegative");
        // law of large numbers on the free side: β_T/T → −m
        let t = 10.0;
        let n = 600;
        let slopes: Vec<f64> = (0..n)
            .map(|s| {
                let p = sample_beta(1.0f64, t, 1e-3, 300 + s as u64).unwrap();
                let v = scalar_values(&p);
                v[v.len() - 1] / t
            })
            .collect();
        let (mean, se) = mean_stderr(&slopes);
        assert!((mean + 1.0).abs() <= 4.0 * se, "mean slope {mean} (se {se})");
        // determinism
        let q = sample_beta(1.0f64, 3.0, 1e-3, 11).unwrap();
        assert_eq!(scalar_values(&p), scalar_values(&q));
    }

    #[test]
    fn functional_tags_are_unit_normalized() {
        // ∫ f(x)/x dx = 1 is what makes every tag target the same constant
        let damped = crate::quad::tanh_sinh(|x: f64| (-x).exp(), 0.0, 60.0, 1e-12).unwrap();
        assert!((damped - 1.0).abs() < 1e-10);
        let truncated = crate::quad::tanh_sinh(|_: f64| 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((truncated - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cone_estimate_reaches_target() {
        let (gamma, m) = (1.0f64, 1.5);
        let est =
            estimate_cone_constant(gamma, m, ConeFunctional::Damped, 1e-3, 2000, 21).unwrap();
        let target = est.target.unwrap();
        assert!((target - 1.0 / (std::f64::consts::PI * 1.5)).abs() < 1e-15);
        assert!(
            (est.mean - target).abs() <= 4.0 * est.stderr,
            "mean {} vs {} (se {})",
            est.mean,
            target,
            est.stderr
        );
        assert!((est.mean / target - 1.0).abs() < 0.08);
    }

    #[test]
    fn cone_functional_tags_agree() {
        let (gamma, m) = (1.0f64, 1.5);
        let a = estimate_cone_constant(gamma, m, ConeFunctional::Damped, 1e-3, 1500, 33).unwrap();
        let b =
            estimate_cone_constant(gamma, m, ConeFunctional::Truncated, 1e-3, 1500, 34).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(
            (a.mean - b.mean).abs() <= 3.0 * se,
            "damped {} vs truncated {}",
            a.mean,
            b.mean
        );
    }

    #[test]
    fn cone_estimator_is_deterministic() {
        let a = estimate_cone_constant(1.0f64, 2.0, ConeFunctional::Damped, 1e-3, 200, 5).unwrap();
        let b = estimate_cone_constant(1.0f64, 2.0, ConeFunctional::Damped, 1e-3, 200, 5).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn drift_functional_is_lambda_invariant() {
        let (gamma, m) = (1.0f64, 1.5);
        let lambdas = [1.0f64, 10.0, 100.0];
        let per = drift_functional_paths(gamma, m, &lambdas, 1e-3, 3000, 61).unwrap();
        let target = 1.0 / (std::f64::consts::PI * gamma * m);
        for (l, vals) in per.iter().enumerate() {
            let (mean, se) = mean_stderr(vals);
            assert!(
                (mean - target).abs() <= 4.0 * se + 0.05 * target,
                "lambda {}: mean {} vs {}",
                lambdas[l],
                mean,
                target
            );
        }
        // paired differences: shared paths make these far tighter than the
        // individual standard errors
        for l in 1..per.len() {
            let diffs: Vec<f64> =
                per[l].iter().zip(&per[l - 1]).map(|(a, b)| a - b).collect();
            let (dm, dse) = mean_stderr(&diffs);
            assert!(
                dm.abs() <= 3.0 * dse,
                "lambda {} vs {}: paired diff {} (se {})",
                lambdas[l],
                lambdas[l - 1],
                dm,
                dse
            );
        }
    }

    fn flat_measure(n: usize, gamma: f64) -> crate::gmc::LiouvilleMeasure<f64> {
        let spec = GridSpec::new(n, 1).unwrap();
        let field = GridField::from_values(spec, vec![0.0; n * n]).unwrap();
        build_measure(&field, gamma).unwrap()
    }

    #[test]
    fn clock_on_flat_measure_is_lebesgue_time() {
        let mu = flat_measure(15, 0.0);
        let path = sample_bridge2d([0.5f64, 0.5], 0.01, 128, 9).unwrap();
        let pts = planar_values(&path);
        assert!(pts.iter().all(|p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0));
        let clock = liouville_clock(&path, &mu).unwrap();
        let lebesgue = path.dt * 128.0;
        assert!((clock - lebesgue).abs() < 1e-12 * lebesgue);
    }

    #[test]
    fn clock_is_additive_over_subpaths() {
        let mu = flat_measure(15, 0.7);
        // a field with structure, not the flat one: shift the cells around
        let spec = GridSpec::new(15, 3).unwrap();
        let field = crate::field::sample_gff::<f64>(&spec).unwrap();
        let mu_rough = build_measure(&field, 0.7).unwrap();
        for measure in [&mu, &mu_rough] {
            let path = sample_bridge2d([0.5f64, 0.5], 0.01, 128, 17).unwrap();
            let pts = planar_values(&path).to_vec();
            let half_a = PathSample {
                dt: path.dt,
                values: PathValues::Planar(pts[..=64].to_vec()),
                kind: PathKind::Bridge2d,
                params: path.params.clone(),
            };
            let half_b = PathSample {
                dt: path.dt,
                values: PathValues::Planar(pts[64..].to_vec()),
                kind: PathKind::Bridge2d,
                params: path.params.clone(),
            };
            let whole = liouville_clock(&path, measure).unwrap();
            let split =
                liouville_clock(&half_a, measure).unwrap() + liouville_clock(&half_b, measure).unwrap();
            assert!((whole - split).abs() <= 1e-12 * whole.abs().max(1e-30));
        }
    }

    #[test]
    fn clock_outside_domain_is_zero_and_flat_density_scales() {
        let mu = flat_measure(15, 0.0);
        let outside = sample_bridge2d([1.5f64, 1.5], 0.01, 64, 2).unwrap();
        assert_eq!(liouville_clock(&outside, &mu).unwrap(), 0.0);
        // h ≡ 0 at γ = 0.5: density is a^{γ²/2} everywhere
        let mu_half = flat_measure(15, 0.5);
        let a = mu_half.spec.spacing::<f64>();
        let path = sample_bridge2d([0.5f64, 0.5], 0.01, 128, 9).unwrap();
        let clock = liouville_clock(&path, &mu_half).unwrap();
        let expect = path.dt * 128.0 * a.powf(0.125);
        assert!((clock - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            sample_bridge2d([0.0f64, 0.0], 1.0, 1, 0),
            Err(PathError::InvalidInput(_))
        ));
        assert!(matches!(
            sample_conditioned(0.0f64, 1.0, 1e-3, 0),
            Err(PathError::InvalidInput(_))
        ));
        assert!(matches!(
            sample_conditioned(1.0f64, 1.0, 2e-3, 0),
            Err(PathError::InvalidInput(_))
        ));
        assert!(matches!(
            sample_beta(1.0f64, 0.0, 1e-3, 0),
            Err(PathError::InvalidInput(_))
        ));
        assert!(matches!(
            estimate_cone_constant(0.0f64, 1.0, ConeFunctional::Damped, 1e-3, 100, 0),
            Err(PathError::InvalidInput(_))
        ));
        assert!(matches!(
            estimate_cone_constant(1.0f64, 1.0, ConeFunctional::Damped, 1e-3, 1, 0),
            Err(PathError::InvalidInput(_))
        ));
        assert!(matches!(
            drift_functional_paths(1.0f64, 1.0, &[0.5], 1e-3, 100, 0),
            Err(PathError::InvalidInput(_))
        ));
        let scalar_path = sample_conditioned(1.0f64, 1.0, 1e-3, 0).unwrap();
        let mu = flat_measure(7, 0.0);
        assert!(matches!(
            liouville_clock(&scalar_path, &mu),
            Err(PathError::KindMismatch(_))
        ));
    }
}
