use thiserror::Error;

/// Errors raised by the simulator.
///
/// Variants are grouped by [`ErrorKind`] so front ends can map them onto
/// stable exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-positive {0}")]
    NonPositive(&'static str),

    #[error("duplicate site at index {second} (same position as site {first})")]
    DuplicateSite { first: usize, second: usize },

    #[error("site list is empty")]
    EmptySites,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("level {n} out of range (n_max = {n_max})")]
    LevelOutOfRange { n: u32, n_max: u32 },

    #[error("channel closed: k_in^2 = {k_in_sq} < 2m*omega = {threshold}")]
    ChannelClosed { k_in_sq: f64, threshold: f64 },

    #[error("incident field is not normalized (norm^2 = {0})")]
    Unnormalized(f64),

    #[error("probability table is not normalized (sum = {0})")]
    UnnormalizedTable(f64),

    #[error("all jump weights are zero")]
    AllWeightsZero,

    #[error("no detection possible: every inelastic channel is closed or unpopulated")]
    NoDetectionPossible,

    #[error("channel truncation tail {tail:e} exceeds {limit:e} of the inelastic mass")]
    TruncationTail { tail: f64, limit: f64 },

    #[error("far-field condition violated: distance {distance} < {required} (100x source diameter)")]
    FraunhoferViolated { distance: f64, required: f64 },

    #[error("pixels {0} and {1} overlap")]
    OverlappingPixels(usize, usize),

    #[error("quadrature needs {needed} evaluations, budget is {budget}")]
    QuadratureBudget { needed: u64, budget: u64 },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    TimeStepTooLarge { dt: f64, bound: f64 },

    #[error("norm drift {0:e} exceeds tolerance")]
    NormDrift(f64),

    #[error("population {0:e} leaked into the highest retained level")]
    ChannelLeakage(f64),

    #[error("probability {0:e} absorbed at the grid boundary")]
    BoundaryFlux(f64),

    #[error("histogram configuration mismatch")]
    ConfigMismatch,

    #[error("insufficient counts: {0} in the central lobe (need at least 100)")]
    InsufficientCounts(u64),

    #[error("need at least two populated sites, found {0}")]
    TooFewSites(usize),

    #[error("delta limit degenerate: zero energy mismatch, no finite time window suffices")]
    DegenerateMismatch,
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Physics,
    Resource,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            InvalidParameter { .. }
            | NonPositive(_)
            | DuplicateSite { .. }
            | EmptySites
            | DimensionMismatch { .. }
            | LevelOutOfRange { .. }
            | OverlappingPixels(..)
            | TimeStepTooLarge { .. }
            | ConfigMismatch => ErrorKind::Config,
            QuadratureBudget { .. } => ErrorKind::Resource,
            _ => ErrorKind::Physics,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
