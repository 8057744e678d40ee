//! `lqg` — experiment driver for the Liouville spectral-geometry toolkit.
//!
//! Each subcommand resolves its parameters from an optional flat key=value
//! file plus command-line overrides, runs one stage of the pipeline, and
//! embeds (seed, version, config hash) provenance in everything it writes.
//! Exit codes: 0 success, 2 configuration error, 3 convergence failure,
//! 4 resolution-gate refusal.

mod cmds;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Resolver;
use error::CliError;

/// Version string embedded in every artifact header.
pub(crate) const VERSION: &str = concat!("lqg-v", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(
    name = "lqg",
    version,
    about = "Liouville measure spectral experiments: fields, spectra, Weyl asymptotics"
)]
struct Cli {
    /// Flat key=value parameter file; explicit flags override its entries.
    #[arg(long, value_name = "FILE", global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a Dirichlet Gaussian free field on the n×n interior grid.
    SampleField {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output field artifact (LQGF1).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Exponentiate a field into the discrete Liouville measure.
    BuildMeasure {
        /// Existing field artifact; omit to sample one from --n/--seed.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Output measure artifact (LQGM1).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Solve the generalized eigenproblem for the bottom of the spectrum.
    SolveSpectrum {
        /// Existing measure artifact; omit to build one from --n/--seed/--gamma.
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Number of eigenvalues from the bottom.
        #[arg(long)]
        k: Option<usize>,
        /// Residual tolerance (must lie in (0, 1e-4]).
        #[arg(long)]
        tol: Option<f64>,
        /// Output spectrum artifact (LQGS1).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also solve for eigenvectors and store them here (LQGV1).
        #[arg(long)]
        vectors_out: Option<PathBuf>,
    },

    /// Eigenvalue counting curve and fitted Weyl slope, one CSV per seed.
    Weyl {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated seed list; runs are independent and parallel.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        window_lo: Option<usize>,
        #[arg(long)]
        window_hi: Option<usize>,
        /// Output CSV; with several seeds, `-s<seed>` is inserted before the
        /// extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Unfolded nearest-neighbour spacing distribution against the Wigner
    /// surmise.
    Spacing {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        window_lo: Option<usize>,
        #[arg(long)]
        window_hi: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Partial heat trace S(t) on a logarithmic time grid with truncation
    /// bounds.
    Heat {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        t_lo: Option<f64>,
        #[arg(long)]
        t_hi: Option<f64>,
        #[arg(long)]
        t_points: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Spatial resolvent weight J_λ(x) over the grid (needs eigenvectors).
    Jlambda {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Monte Carlo estimate of the quantum-cone constant 1/(πγm).
    ConeMc {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the first sampled path as a two-column t,value CSV.
        #[arg(long)]
        dump_path: Option<PathBuf>,
    },

    /// Check the exact Brownian-bridge maximum law P(max ≥ k) = e^{−2k²/ℓ}.
    BridgeCheck {
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        ell: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Tauberian transfer battery: Laplace asymptotics vs counting
    /// asymptotics on reference densities.
    Tauberian {
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Chain the full γ = 0.5 pipeline and emit every plot-ready artifact.
    ReproduceFigures {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Directory for the artifact set (created if missing).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.as_deref();
    match cli.cmd {
        Cmd::SampleField { n, seed, out } => {
            let mut r = Resolver::new("sample-field", cfg)?;
            cmds::sample_field(&mut r, n, seed, out)
        }
        Cmd::BuildMeasure { field, n, seed, gamma, out } => {
            let mut r = Resolver::new("build-measure", cfg)?;
            cmds::build_measure(&mut r, field, n, seed, gamma, out)
        }
        Cmd::SolveSpectrum { measure, n, seed, gamma, k, tol, out, vectors_out } => {
            let mut r = Resolver::new("solve-spectrum", cfg)?;
            cmds::solve_spectrum(&mut r, measure, n, seed, gamma, k, tol, out, vectors_out)
        }
        Cmd::Weyl { n, gamma, k, tol, seed, seeds, window_lo, window_hi, out } => {
            let mut r = Resolver::new("weyl", cfg)?;
            cmds::weyl(&mut r, n, gamma, k, tol, seed, seeds, window_lo, window_hi, out)
        }
        Cmd::Spacing { n, seed, gamma, k, tol, window_lo, window_hi, out } => {
            let mut r = Resolver::new("spacing", cfg)?;
            cmds::spacing(&mut r, n, seed, gamma, k, tol, window_lo, window_hi, out)
        }
        Cmd::Heat { n, seed, gamma, k, tol, t_lo, t_hi, t_points, out } => {
            let mut r = Resolver::new("heat", cfg)?;
            cmds::heat(&mut r, n, seed, gamma, k, tol, t_lo, t_hi, t_points, out)
        }
        Cmd::Jlambda { n, seed, gamma, k, tol, lambda, out } => {
            let mut r = Resolver::new("jlambda", cfg)?;
            cmds::jlambda(&mut r, n, seed, gamma, k, tol, lambda, out)
        }
        Cmd::ConeMc { gamma, m, dt, paths, seed, out, dump_path } => {
            let mut r = Resolver::new("cone-mc", cfg)?;
            cmds::cone_mc(&mut r, gamma, m, dt, paths, seed, out, dump_path)
        }
        Cmd::BridgeCheck { paths, steps, ell, seed } => {
            let mut r = Resolver::new("bridge-check", cfg)?;
            cmds::bridge_check(&mut r, paths, steps, ell, seed)
        }
        Cmd::Tauberian { out } => {
            let mut r = Resolver::new("tauberian", cfg)?;
            cmds::tauberian(&mut r, out)
        }
        Cmd::ReproduceFigures { n, gamma, k, tol, seeds, dt, paths, out_dir } => {
            let mut r = Resolver::new("reproduce-figures", cfg)?;
            cmds::reproduce_figures(&mut r, n, gamma, k, tol, seeds, dt, paths, out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
