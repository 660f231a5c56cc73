use thiserror::Error;

use crate::steady::ConvergenceReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation n_max={n_max} gives dim={dim}, superoperator would hold {entries} entries (limit {limit})")]
    InfeasibleTruncation {
        n_max: usize,
        dim: usize,
        entries: usize,
        limit: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index ({row}, {col}) out of range for a {rows}x{cols} operator")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("steady-state solve failed: {0}")]
    SolveFailed(String),

    #[error("steady state not positive: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("truncation did not converge up to n_max={}", .report.final_n_max)]
    NotConverged { report: Box<ConvergenceReport> },

    #[error("pump cutoff did not converge up to {cutoff} photons")]
    PumpNotConverged { cutoff: usize },

    #[error("expectation value has imaginary part {imag:e}; state is numerically corrupted")]
    NumericalCorruption { imag: f64 },

    #[error("g2(0) undefined: occupation {occupation:e} below floor")]
    UndefinedG2 { occupation: f64 },

    #[error("no sign change of min g2(0) - target in bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("integrator step size underflow at t={t:e} (h={h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("invalid driving protocol: {0}")]
    InvalidProtocol(String),

    #[error("platform data row {row}, field `{field}`: {message}")]
    Schema {
        row: usize,
        field: String,
        message: String,
    },

    #[error("unsupported ring radius ratio {0}; only 1/2 is supported")]
    UnsupportedRatio(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
