//! File formats. Binary artifacts share one shape: an ASCII header (magic
//! line, `key=value` lines, blank line) followed by a little-endian f64
//! payload — greppable headers, lossless numbers. Formats:
//!
//! - `LQGF1`: field values (n², keys n, seed)
//! - `LQGM1`: measure cells (n², keys n, seed, gamma)
//! - `LQGS1`: eigenvalues (k, keys n, seed, gamma, k, tol); the measure is
//!   re-derivable from (n, seed, gamma), so no masses are duplicated here
//! - `LQGV1`: eigenvectors (k·n², same keys as LQGS1)
//!
//! Every header may carry optional `version=` and `config=` provenance
//! strings. The CSV writers pin their column sets and prefix provenance as
//! `#` comment lines; all floats print with Rust's shortest-roundtrip
//! `Display`.
//!
//! Binary formats are f64-only on purpose: they describe artifacts, not the
//! generic compute path.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::asymptotics::TransformReport;
use crate::field::{GridField, GridSpec};
use crate::gmc::LiouvilleMeasure;
use crate::heat::HeatTraceCurve;
use crate::spectral::Spectrum;
use crate::stats::{wigner_cdf, QueRow, SpacingStats};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad file format: {0}")]
    Format(String),
}

/// Optional provenance strings embedded in binary headers.
#[derive(Clone, Copy, Default)]
pub struct Meta<'a> {
    pub version: Option<&'a str>,
    pub config: Option<&'a str>,
}

const MAGIC_FIELD: &str = "LQGF1";
const MAGIC_MEASURE: &str = "LQGM1";
const MAGIC_SPECTRUM: &str = "LQGS1";
const MAGIC_VECTORS: &str = "LQGV1";

fn bad(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

fn check_meta_value(v: &str) -> Result<(), IoError> {
    if v.contains('\n') || v.contains('\r') {
        return Err(bad("metadata values must be single-line"));
    }
    Ok(())
}

fn write_artifact(
    path: &Path,
    magic: &str,
    keys: &[(&str, String)],
    meta: Meta<'_>,
    payload: &[f64],
) -> Result<(), IoError> {
    for v in payload {
        if !v.is_finite() {
            return Err(bad("refusing to write non-finite payload values"));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{magic}")?;
    for (k, v) in keys {
        check_meta_value(v)?;
        writeln!(w, "{k}={v}")?;
    }
    if let Some(v) = meta.version {
        check_meta_value(v)?;
        writeln!(w, "version={v}")?;
    }
    if let Some(c) = meta.config {
        check_meta_value(c)?;
        writeln!(w, "config={c}")?;
    }
    writeln!(w)?;
    for v in payload {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Header {
    keys: BTreeMap<String, String>,
}

impl Header {
    fn take(&mut self, key: &str) -> Result<String, IoError> {
        self.keys.remove(key).ok_or_else(|| bad(format!("missing key `{key}`")))
    }

    fn take_usize(&mut self, key: &str) -> Result<usize, IoError> {
        self.take(key)?.parse().map_err(|e| bad(format!("key `{key}`: {e}")))
    }

    fn take_u64(&mut self, key: &str) -> Result<u64, IoError> {
        self.take(key)?.parse().map_err(|e| bad(format!("key `{key}`: {e}")))
    }

    fn take_f64(&mut self, key: &str) -> Result<f64, IoError> {
        let v: f64 =
            self.take(key)?.parse().map_err(|e| bad(format!("key `{key}`: {e}")))?;
        if !v.is_finite() {
            return Err(bad(format!("key `{key}` must be finite")));
        }
        Ok(v)
    }

    /// After the format's keys are consumed, only provenance may remain.
    fn finish(mut self) -> Result<(), IoError> {
        self.keys.remove("version");
        self.keys.remove("config");
        if let Some(k) = self.keys.keys().next() {
            return Err(bad(format!("unknown key `{k}`")));
        }
        Ok(())
    }
}

fn read_header<R: BufRead>(r: &mut R, magic: &str) -> Result<Header, IoError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end_matches('\n') != magic {
        return Err(bad(format!("expected magic `{magic}`, got `{}`", line.trim_end())));
    }
    let mut keys = BTreeMap::new();
    loop {
        line.clear();
        let n = r.read_line(&mut line)?;
        if n == 0 {
            return Err(bad("header ended without a blank line"));
        }
        let trimmed = line.trim_end_matches('\n');
        if trimmed.is_empty() {
            break;
        }
        let (k, v) = trimmed
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header line `{trimmed}`")))?;
        if keys.insert(k.to_string(), v.to_string()).is_some() {
            return Err(bad(format!("duplicate key `{k}`")));
        }
    }
    Ok(Header { keys })
}

fn read_payload<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>, IoError> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            bad(format!("payload shorter than the {count} values the header promises"))
        } else {
            IoError::Io(e)
        }
    })?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(bad("trailing bytes after payload"));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("payload contains non-finite values"));
    }
    Ok(values)
}

fn grid_spec(n: usize, seed: u64) -> Result<GridSpec, IoError> {
    GridSpec::new(n, seed).map_err(|e| bad(e.to_string()))
}

// ---------------------------------------------------------------------------
// binary artifacts

pub fn write_field(path: &Path, field: &GridField<f64>, meta: Meta<'_>) -> Result<(), IoError> {
    let keys = [
        ("n", field.spec.n.to_string()),
        ("seed", field.spec.seed.to_string()),
    ];
    write_artifact(path, MAGIC_FIELD, &keys, meta, field.values())
}

pub fn read_field(path: &Path) -> Result<GridField<f64>, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = read_header(&mut r, MAGIC_FIELD)?;
    let n = h.take_usize("n")?;
    let seed = h.take_u64("seed")?;
    h.finish()?;
    let spec = grid_spec(n, seed)?;
    let values = read_payload(&mut r, n * n)?;
    GridField::from_values(spec, values).map_err(|e| bad(e.to_string()))
}

pub fn write_measure(
    path: &Path,
    measure: &LiouvilleMeasure<f64>,
    meta: Meta<'_>,
) -> Result<(), IoError> {
    let keys = [
        ("n", measure.spec.n.to_string()),
        ("seed", measure.spec.seed.to_string()),
        ("gamma", measure.gamma.to_string()),
    ];
    write_artifact(path, MAGIC_MEASURE, &keys, meta, measure.cells())
}

pub fn read_measure(path: &Path) -> Result<LiouvilleMeasure<f64>, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = read_header(&mut r, MAGIC_MEASURE)?;
    let n = h.take_usize("n")?;
    let seed = h.take_u64("seed")?;
    let gamma = h.take_f64("gamma")?;
    h.finish()?;
    let spec = grid_spec(n, seed)?;
    let cells = read_payload(&mut r, n * n)?;
    LiouvilleMeasure::from_cells(spec, gamma, cells).map_err(|e| bad(e.to_string()))
}

/// The part of a solve that LQGS1 persists; vectors travel separately.
#[derive(Clone, Debug)]
pub struct StoredSpectrum {
    pub spec: GridSpec,
    pub gamma: f64,
    pub tol: f64,
    pub eigenvalues: Vec<f64>,
}

pub fn write_spectrum(
    path: &Path,
    spectrum: &Spectrum<f64>,
    meta: Meta<'_>,
) -> Result<(), IoError> {
    let keys = [
        ("n", spectrum.spec.n.to_string()),
        ("seed", spectrum.spec.seed.to_string()),
        ("gamma", spectrum.gamma.to_string()),
        ("k", spectrum.k().to_string()),
        ("tol", spectrum.tol.to_string()),
    ];
    write_artifact(path, MAGIC_SPECTRUM, &keys, meta, &spectrum.eigenvalues)
}

pub fn read_spectrum(path: &Path) -> Result<StoredSpectrum, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = read_header(&mut r, MAGIC_SPECTRUM)?;
    let n = h.take_usize("n")?;
    let seed = h.take_u64("seed")?;
    let gamma = h.take_f64("gamma")?;
    let k = h.take_usize("k")?;
    let tol = h.take_f64("tol")?;
    h.finish()?;
    let spec = grid_spec(n, seed)?;
    let eigenvalues = read_payload(&mut r, k)?;
    if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad("eigenvalues are not ascending"));
    }
    Ok(StoredSpectrum { spec, gamma, tol, eigenvalues })
}

pub fn write_vectors(
    path: &Path,
    spectrum: &Spectrum<f64>,
    meta: Meta<'_>,
) -> Result<(), IoError> {
    if !spectrum.has_vectors() {
        return Err(bad("spectrum was solved without vectors"));
    }
    let dim = spectrum.spec.n * spectrum.spec.n;
    let k = spectrum.k();
    let mut payload = Vec::with_capacity(k * dim);
    for j in 0..k {
        payload.extend_from_slice(spectrum.eigenvector(j).unwrap());
    }
    let keys = [
        ("n", spectrum.spec.n.to_string()),
        ("seed", spectrum.spec.seed.to_string()),
        ("gamma", spectrum.gamma.to_string()),
        ("k", k.to_string()),
        ("tol", spectrum.tol.to_string()),
    ];
    write_artifact(path, MAGIC_VECTORS, &keys, meta, &payload)
}

/// Eigenvectors as (k, n, row-major k×n² matrix); pairs with read_spectrum.
pub fn read_vectors(path: &Path) -> Result<(usize, usize, Vec<f64>), IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = read_header(&mut r, MAGIC_VECTORS)?;
    let n = h.take_usize("n")?;
    let _seed = h.take_u64("seed")?;
    let _gamma = h.take_f64("gamma")?;
    let k = h.take_usize("k")?;
    let _tol = h.take_f64("tol")?;
    h.finish()?;
    let payload = read_payload(&mut r, k * n * n)?;
    Ok((k, n, payload))
}

// ---------------------------------------------------------------------------
// CSV artifacts

fn csv_writer(path: &Path, comments: &[String], header: &str) -> Result<BufWriter<File>, IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in comments {
        check_meta_value(c)?;
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{header}")?;
    Ok(w)
}

#[derive(Clone, Debug)]
pub struct WeylCsvRow {
    pub lambda: f64,
    pub count: usize,
    /// c_γ·μ̂(D)·λ
    pub prediction: f64,
    /// the γ = 0 comparison line c₀·μ̂(D)·λ
    pub riemannian: f64,
}

pub fn write_weyl_csv(
    path: &Path,
    rows: &[WeylCsvRow],
    comments: &[String],
) -> Result<(), IoError> {
    let mut w = csv_writer(path, comments, "lambda,count,prediction,riemannian")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.lambda, r.count, r.prediction, r.riemannian)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spacing_csv(
    path: &Path,
    stats: &SpacingStats<f64>,
    comments: &[String],
) -> Result<(), IoError> {
    let mut w = csv_writer(path, comments, "s,ecdf,wigner_cdf")?;
    for (s, e) in stats.ecdf_grid.iter().zip(&stats.ecdf) {
        writeln!(w, "{},{},{}", s, e, wigner_cdf(*s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_que_csv(path: &Path, rows: &[QueRow<f64>], comments: &[String]) -> Result<(), IoError> {
    let mut w = csv_writer(path, comments, "n,region,overlap,target,ipr")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.n,
            r.region.label(),
            r.overlap,
            r.target,
            r.ipr
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_heat_csv(
    path: &Path,
    curve: &HeatTraceCurve<f64>,
    reference_density: f64,
    comments: &[String],
) -> Result<(), IoError> {
    let mut w = csv_writer(path, comments, "t,S,tS,prediction,tail_bound")?;
    for i in 0..curve.times.len() {
        let t = curve.times[i];
        let s = curve.values[i];
        writeln!(
            w,
            "{},{},{},{},{}",
            t,
            s,
            t * s,
            reference_density / t,
            curve.tail_bounds[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jlambda_csv(
    path: &Path,
    j_values: &[f64],
    cells: &[f64],
    lambda: f64,
    comments: &[String],
) -> Result<(), IoError> {
    if j_values.len() != cells.len() {
        return Err(bad("J field and measure cells disagree in length"));
    }
    let mut w = csv_writer(path, comments, "x_index,mass,J,lambda")?;
    for (i, (j, m)) in j_values.iter().zip(cells).enumerate() {
        writeln!(w, "{},{},{},{}", i, m, j, lambda)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ConeCsvRow {
    pub gamma: f64,
    pub m: f64,
    pub f: &'static str,
    pub n_paths: usize,
    pub dt: f64,
    pub t_span: f64,
    pub mean: f64,
    pub stderr: f64,
    pub target: f64,
}

pub fn write_cone_csv(
    path: &Path,
    rows: &[ConeCsvRow],
    comments: &[String],
) -> Result<(), IoError> {
    let mut w = csv_writer(path, comments, "gamma,m,f,n_paths,dt,T,mean,stderr,target")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.gamma, r.m, r.f, r.n_paths, r.dt, r.t_span, r.mean, r.stderr, r.target
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One header, several named cases separated by `# case <name>` lines.
pub fn write_tauberian_csv(
    path: &Path,
    cases: &[(&str, &TransformReport<f64>)],
    comments: &[String],
) -> Result<(), IoError> {
    let mut w = csv_writer(path, comments, "lambda,lhs,rhs,ratio")?;
    for (name, report) in cases {
        writeln!(w, "# case {name}")?;
        for i in 0..report.grid.len() {
            writeln!(
                w,
                "{},{},{},{}",
                report.grid[i],
                report.lhs[i],
                report.rhs[i],
                report.lhs[i] / report.rhs[i]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
