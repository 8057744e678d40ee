use std::fmt;

use lqg_core::asymptotics::AsympError;
use lqg_core::field::FieldError;
use lqg_core::gmc::MeasureError;
use lqg_core::heat::HeatError;
use lqg_core::io::IoError;
use lqg_core::paths::PathError;
use lqg_core::spectral::SpectralError;
use lqg_core::stats::StatsError;

/// Every failure funnels into one of three exit classes: 2 for anything the
/// user can fix in the configuration, 3 when a solver or sampler gives up,
/// 4 when a resolution gate refuses to emit numbers it cannot stand behind.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Convergence(String),
    Resolution(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Resolution(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Convergence(m) => write!(f, "convergence: {m}"),
            CliError::Resolution(m) => write!(f, "resolution gate: {m}"),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidInput(_) => CliError::Config(e.to_string()),
            SpectralError::Factorization { .. } | SpectralError::Convergence { .. } => {
                CliError::Convergence(e.to_string())
            }
        }
    }
}

impl From<PathError> for CliError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::CapExceeded { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<HeatError> for CliError {
    fn from(e: HeatError) -> Self {
        match e {
            HeatError::Unresolved { .. } => CliError::Resolution(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<AsympError> for CliError {
    fn from(e: AsympError) -> Self {
        match e {
            AsympError::Quadrature(_) => CliError::Convergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
