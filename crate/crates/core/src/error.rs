use core::fmt;

/// Error type shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration field violates its documented range.
    Config(&'static str),
    /// Flat grid index outside `[1, N_t*N_f]`.
    IndexOutOfRange { index: usize, len: usize },
    /// Grid point lies outside the visible region (cosine argument
    /// magnitude above one); it carries no physical angle.
    OffGridAngle { cos_value: f64 },
    /// An argument violates a documented precondition.
    Invalid(&'static str),
    /// Numerical rank is below what the operation requires.
    RankDeficient { required: usize, rank: usize },
    /// Input series carries no energy.
    DegenerateSeries,
    /// Poles coincide; the Vandermonde system is singular.
    DuplicatePoles,
    /// Vector or matrix dimensions disagree.
    DimensionMismatch { expected: usize, got: usize },
    /// An iterative numerical routine failed to converge.
    NoConvergence(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "flat index {index} outside [1, {len}]")
            }
            Error::OffGridAngle { cos_value } => {
                write!(f, "grid point outside visible region (cos = {cos_value})")
            }
            Error::Invalid(msg) => write!(f, "invalid argument: {msg}"),
            Error::RankDeficient { required, rank } => {
                write!(f, "rank deficient: need {required}, found {rank}")
            }
            Error::DegenerateSeries => write!(f, "series carries no energy"),
            Error::DuplicatePoles => write!(f, "duplicated poles"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NoConvergence(what) => write!(f, "no convergence in {what}"),
        }
    }
}

impl core::error::Error for Error {}
