use thiserror::Error;

/// Errors raised by the simulation and calibration routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible purity {purity} for {modes} Schmidt mode(s): need 1/K <= purity <= 1")]
    InfeasiblePurity { purity: f64, modes: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("heralding impossible: {0}")]
    HeraldImpossible(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("undefined visibility: fringe maximum and minimum are both zero")]
    UndefinedVisibility,

    #[error("grid resolution error: {0}")]
    Resolution(String),

    #[error("empty joint spectral amplitude: {0}")]
    EmptyJsa(String),

    #[error("unidentifiable fit: {0}")]
    Unidentifiable(String),

    #[error("fit failed after {restarts} restart(s); best residual norm {residual:.6e}")]
    FitFailure { restarts: usize, residual: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
