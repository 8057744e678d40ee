//! Simulation and verification toolkit for the spectral geometry of
//! Liouville quantum gravity (LQG) at desk scale.
//!
//! The pipeline: sample a discrete Dirichlet Gaussian free field on the unit
//! square ([`field`]), exponentiate it into a Liouville / Gaussian
//! multiplicative chaos measure ([`gmc`]), assemble the stiffness/mass pair of
//! the Liouville Brownian motion Dirichlet form and solve for the low spectrum
//! ([`spectral`]), then interrogate the eigenvalues: Weyl-law fits and spacing
//! statistics ([`stats`]), heat-trace and resolvent functionals ([`heat`]).
//! Independent of the grid pipeline, [`paths`] runs stochastic-path Monte
//! Carlo (Brownian bridges with exact max laws, Williams sampling of the
//! conditioned process, the two-sided cone process and its constant), and
//! [`asymptotics`] verifies the Tauberian / asymptotic-differentiation
//! transfers on deterministic inputs.
//!
//! All numeric kernels are generic over the floating-point type through
//! [`Scalar`] (implemented for `f32` and `f64`); the concrete aliases below
//! fix the default double-precision instantiations used by the CLI and the
//! file formats.

pub mod asymptotics;
pub mod field;
pub mod gmc;
pub mod green;
pub mod heat;
pub mod io;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod stats;
pub mod util;

pub use scalar::Scalar;

pub use field::{GridField, GridSpec};
pub use gmc::LiouvilleMeasure;
pub use green::GreenTable;
pub use spectral::{OperatorPair, Spectrum};

/// Default double-precision field.
pub type Field64 = field::GridField<f64>;
/// Single-precision field.
pub type Field32 = field::GridField<f32>;
/// Default double-precision measure.
pub type Measure64 = gmc::LiouvilleMeasure<f64>;
/// Single-precision measure.
pub type Measure32 = gmc::LiouvilleMeasure<f32>;
/// Default double-precision spectrum.
pub type Spectrum64 = spectral::Spectrum<f64>;
/// Default double-precision Green table.
pub type Green64 = green::GreenTable<f64>;
/// Default double-precision operator pair.
pub type Pair64 = spectral::OperatorPair<f64>;
