use std::path::PathBuf;

use thiserror::Error;

use crate::effects::RevisionTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("too few rows: {0} usable observations, at least 3 required")]
    TooFewRows(usize),

    #[error("variable '{0}' has zero variance")]
    ZeroVariance(String),

    #[error("singular matrix ({0})")]
    SingularMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("correlation matrix is not square: {0}")]
    NotSquare(String),

    #[error(
        "correlation matrix asymmetric at ({row}, {col}): difference {difference:e} exceeds 1e-6"
    )]
    AsymmetryTooLarge {
        row: String,
        col: String,
        difference: f64,
    },

    #[error("diagonal entry for '{name}' is {value}, expected 1")]
    DiagonalNotOne { name: String, value: f64 },

    #[error("correlation matrix is not positive semidefinite")]
    NotPositiveSemidefinite,

    #[error("value {0} is outside [-1, 1]")]
    OutOfRange(f64),

    #[error("sample covariance matrix is singular")]
    SingularCovariance,

    #[error("variable '{0}' is missing from the input")]
    VariableMissing(String),

    #[error("unknown variable '{0}'")]
    UnknownVariable(String),

    #[error("duplicate variable '{0}'")]
    DuplicateVariable(String),

    #[error("duplicate arrow {0} -> {1}")]
    DuplicateArrow(String, String),

    #[error("self-loop on '{0}'")]
    SelfLoop(String),

    #[error("cycle detected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),

    #[error("model has no endogenous variable")]
    NoEndogenous,

    #[error(
        "degrees of freedom exhausted in equation for '{equation}' (n = {n}, parents = {parents})"
    )]
    DegreesOfFreedomExhausted {
        equation: String,
        n: usize,
        parents: usize,
    },

    #[error("arrow {from} -> {to} has no coefficient")]
    MissingCoefficient { from: String, to: String },

    #[error("residual variance of '{variable}' is {value}, must be positive")]
    NonPositiveResidualVariance { variable: String, value: f64 },

    #[error("too many variables for trek enumeration: {0} (limit 20)")]
    TooManyVariables(usize),

    #[error("variable sets differ: {0}")]
    VariableMismatch(String),

    #[error("misfit persists but no admissible arrow can be added")]
    NoAdmissibleRevision(Box<RevisionTrace>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
