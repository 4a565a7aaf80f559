//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions are inconsistent for the requested operation.
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    /// The selected eigenvalue is defective or near-defective: |x*y| is below
    /// tolerance, so the eigenvalue condition number is not usable.
    #[error("ill-conditioned target eigenvalue: |x*y| = {xy_abs:e} below tolerance (defective or near-defective)")]
    IllConditionedEigenvalue { xy_abs: f64 },

    /// The QR / Arnoldi iteration failed to converge within its budget.
    #[error("eigensolver failed to converge ({context})")]
    EigConvergence { context: String },

    /// The projected rank-1 direction has (numerically) no component in the
    /// structure space: ||Pi^S(u v*)||_F is below tolerance.
    #[error("structure degeneracy: ||Pi^S(u v*)||_F = {norm:e} is numerically zero")]
    StructureDegeneracy { norm: f64 },

    /// Line search reduced the step below the configured floor without
    /// finding an acceptable step.
    #[error("step size stalled below floor {min_h:e} at iteration {iter}")]
    StalledStep { min_h: f64, iter: usize },

    /// The current point is stationary: the admissible steepest-descent
    /// direction vanishes (E is a real multiple of the structured gradient).
    #[error("stationary point: steepest admissible descent direction vanishes")]
    StationaryPoint,

    /// A matrix supplied to a structure constructor is rank deficient.
    #[error("rank deficiency in {what}: column/row rank below full")]
    RankDeficient { what: &'static str },

    /// The outer iteration's growth phase found no epsilon with phi <= r.
    #[error("no crossing: phi({eps_max:e}) = {phi:e} still above target {r:e}")]
    NoCrossing { eps_max: f64, phi: f64, r: f64 },

    /// Problem description is internally inconsistent.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// Text-format parse failure (Matrix Market, JSON problem files, traces).
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
