//! Crate error type.

use std::fmt;

/// Errors surfaced by the coding, decoding and analysis operations.
#[derive(Debug)]
pub enum Error {
    /// A channel specification violated a pairing or parameter rule.
    InvalidChannel(String),
    /// A design function violated the positivity, Lipschitz or normalization
    /// constraints.
    InvalidDesignFunction(String),
    /// The conditional output likelihood underflowed to zero; the observation
    /// is numerically impossible under the current estimate.
    DegenerateLikelihood { p: f64, y: f64, tau: f64 },
    /// Doubling the quadrature nodes moved the result beyond tolerance.
    QuadratureNonConvergence { coarse: f64, fine: f64, rel: f64 },
    /// The two halves of the Monte-Carlo sample bank disagree beyond three
    /// standard errors; the sample budget is too small for this estimate.
    McBudget { half_gap: f64, threshold: f64 },
    /// A fixed-point iteration hit its iteration cap without converging.
    MaxIterations { max_iter: usize, last_delta: f64 },
    /// Doubling search failed to bracket the threshold predicate.
    BracketNotFound { hi: f64 },
    /// Bisection observed a non-monotone predicate.
    NonMonotonePredicate { at: f64 },
    /// Block counts must divide the matrix dimensions.
    Divisibility { m: usize, n: usize, gamma: usize },
    /// Vector or matrix dimensions disagree.
    DimensionMismatch { expected: usize, got: usize },
    /// A precondition on operation arguments was violated.
    Precondition(String),
    /// GAMP variance grew past the overflow guard.
    Divergence { tau_p_max: f64, iteration: usize },
    /// A non-finite value appeared during decoding.
    NonFinite { iteration: usize },
    /// Operation is undefined for this channel.
    NotApplicable(&'static str),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidChannel(msg) => write!(f, "invalid channel spec: {msg}"),
            Error::InvalidDesignFunction(msg) => write!(f, "invalid design function: {msg}"),
            Error::DegenerateLikelihood { p, y, tau } => write!(
                f,
                "degenerate likelihood: f(y={y} | p={p}, tau={tau}) underflowed to zero"
            ),
            Error::QuadratureNonConvergence { coarse, fine, rel } => write!(
                f,
                "quadrature did not converge: {coarse} vs {fine} under node doubling (rel {rel:.2e})"
            ),
            Error::McBudget { half_gap, threshold } => write!(
                f,
                "Monte-Carlo budget too small: half-sample gap {half_gap:.3e} exceeds {threshold:.3e}"
            ),
            Error::MaxIterations { max_iter, last_delta } => write!(
                f,
                "no fixed point after {max_iter} iterations (last delta {last_delta:.3e})"
            ),
            Error::BracketNotFound { hi } => {
                write!(f, "threshold bracket not found below rate {hi}")
            }
            Error::NonMonotonePredicate { at } => {
                write!(f, "bisection predicate is not monotone near rate {at}")
            }
            Error::Divisibility { m, n, gamma } => write!(
                f,
                "block count {gamma} must divide both dimensions (M={m}, N={n})"
            ),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Divergence { tau_p_max, iteration } => write!(
                f,
                "GAMP diverged at iteration {iteration}: tau_p reached {tau_p_max:.3e}"
            ),
            Error::NonFinite { iteration } => {
                write!(f, "non-finite value during decoding at iteration {iteration}")
            }
            Error::NotApplicable(msg) => write!(f, "not applicable: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
