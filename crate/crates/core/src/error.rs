use thiserror::Error;

use crate::lattice::Subset;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty set where a non-empty subset is required")]
    EmptySet,

    #[error("size {size} exceeds the supported maximum {max}")]
    TooLarge { size: usize, max: usize },

    #[error("ground-set size must be at least 1")]
    EmptyGroundSet,

    #[error("vector length {len} is not 2^{n}")]
    InvalidLength { n: usize, len: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("element {element} outside the ground set 1..={n}")]
    ElementOutOfRange { element: usize, n: usize },

    #[error("subset mask {mask:#b} outside the ground set of size {n}")]
    SubsetOutOfRange { mask: u32, n: usize },

    #[error("not a probability vector: {reason}")]
    NotStochastic { reason: String },

    #[error("entries do not sum to zero (sum = {sum:e})")]
    NotZeroSum { sum: f64 },

    #[error("matrix lacks Property CM: entry ({row}, {col}) deviates by {deviation:e}")]
    NotCm {
        row: Subset,
        col: Subset,
        deviation: f64,
    },

    #[error("matrix lacks Property CG: entry ({row}, {col}) deviates by {deviation:e}")]
    NotCg {
        row: Subset,
        col: Subset,
        deviation: f64,
    },

    #[error("singular CM matrix: p_empty = {p_empty:e}")]
    SingularMatrix { p_empty: f64 },

    #[error("not embeddable: negative rates at {witnesses:?}")]
    NotEmbeddable { witnesses: Vec<Subset> },

    #[error("rate vector is not a generator: r_{subset} = {rate:e}")]
    NotGenerator { subset: Subset, rate: f64 },

    #[error("independent sampling probability pi_{element} = {value} must lie strictly in (0, 1)")]
    DegenerateIndependent { element: usize, value: f64 },

    #[error("conditioning on an event of probability zero (q_{0} = 0)")]
    ConditionOnNullEvent(Subset),

    #[error("the two elements must differ (got {0} twice)")]
    SameElement(usize),

    #[error("series did not converge within {terms} terms (norm {norm:e})")]
    NonConvergence { norm: f64, terms: usize },

    #[error("logarithm series needs ||y - eps|| < 1, got {norm}")]
    OutOfConvergenceRegion { norm: f64 },

    #[error("spectral radius bound {bound} of M - 1 is too large for the log series")]
    SpectralRadiusTooLarge { bound: f64 },

    #[error("time must be finite and non-negative, got {0}")]
    InvalidTime(f64),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("time {t} lies beyond the schedule end {end}")]
    BeyondSchedule { t: f64, end: f64 },

    #[error("elements {0:?} are never sampled; collection time is infinite")]
    Unreachable(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
