use thiserror::Error;

/// Errors raised across the planning stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the formula it feeds.
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    /// Throughput at or beyond the capacity of the line.
    #[error("unstable: throughput {lambda} >= capacity {capacity}")]
    Unstable { lambda: f64, capacity: f64 },

    /// A requested sojourn time below the raw process time.
    #[error("infeasible sojourn time {l}: below total process time {pt_f}")]
    InfeasibleSojourn { l: f64, pt_f: f64 },

    /// The performance curve could not be inverted inside the stability interval.
    #[error("no throughput in the stability interval yields sojourn time {l}")]
    InversionFailed { l: f64 },

    /// No grid cell satisfies stability and the capital budget.
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    /// The MPS horizon does not reach the day a stage maps onto.
    #[error("stage {stage} maps to day {day}, beyond the {horizon}-day requirement horizon")]
    HorizonTooShort { stage: usize, day: usize, horizon: usize },

    /// Inconsistent or missing input data.
    #[error("data error: {0}")]
    Data(String),

    /// A scenario failed validation before any computation ran.
    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}
