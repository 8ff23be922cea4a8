use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside the valid range {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error(
        "coefficient tail not below tolerance {tolerance:e} within {cap} terms (memory parameter {mu})"
    )]
    TruncationBudgetExceeded { cap: usize, tolerance: f64, mu: f64 },

    #[error("band half-width {band} too wide for order {n}: need 2N < n")]
    BandTooWide { band: usize, n: usize },

    #[error("singular value decomposition did not converge for order {n}")]
    ConvergenceFailure { n: usize },

    #[error("adaptive quadrature hit its budget of {intervals} intervals (error estimate {error_estimate:e}, requested {tolerance:e})")]
    QuadratureBudgetExceeded {
        intervals: usize,
        error_estimate: f64,
        tolerance: f64,
    },

    #[error("{0}")]
    Domain(String),

    #[error("quantum capacity vanishes: maximum transmissivity {max_transmissivity} <= 1/2")]
    ZeroCapacityRegion { max_transmissivity: f64 },

    #[error("capacity diverges at transmissivity 1")]
    DivergentCapacity,

    #[error("target unreachable: asymptotic capacity is {capacity}, must be positive")]
    UnreachableTarget { capacity: f64 },
}

impl Error {
    /// Stable machine-readable name used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::TruncationBudgetExceeded { .. } => "TruncationBudgetExceeded",
            Error::BandTooWide { .. } => "BandTooWide",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::QuadratureBudgetExceeded { .. } => "QuadratureBudgetExceeded",
            Error::Domain(_) => "DomainError",
            Error::ZeroCapacityRegion { .. } => "ZeroCapacityRegion",
            Error::DivergentCapacity => "DivergentCapacity",
            Error::UnreachableTarget { .. } => "UnreachableTarget",
        }
    }

    /// True for errors caused by inputs outside a formula's domain, as opposed
    /// to numerical breakdowns.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::BandTooWide { .. }
                | Error::Domain(_)
                | Error::ZeroCapacityRegion { .. }
                | Error::DivergentCapacity
                | Error::UnreachableTarget { .. }
        )
    }
}
