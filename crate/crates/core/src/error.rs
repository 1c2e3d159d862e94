//! Error type shared by all simulator modules.

use thiserror::Error;

/// Errors produced by parameter validation, policy feasibility checks,
/// stochastic configuration, and the brute-force oracles.
#[derive(Debug, Error)]
pub enum SimError {
    /// A model or policy parameter is outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A positive rate was scheduled on a sub-carrier with zero gain.
    #[error("infeasible rate {rate} on sub-carrier {carrier} with zero channel gain")]
    InfeasibleRate { carrier: usize, rate: f64 },

    /// An action violated its state's feasibility set (policy bug).
    #[error("infeasible action at period {period}: {reason}")]
    InfeasibleAction { period: u64, reason: String },

    /// Every sub-carrier has zero gain; no rate can be scheduled.
    #[error("channel outage: all sub-carrier gains are zero")]
    Outage,

    /// A categorical distribution failed validation.
    #[error("invalid distribution {name}: {reason}")]
    InvalidDistribution { name: &'static str, reason: String },

    /// A brute-force horizon instance would exceed the enumeration budget.
    #[error("horizon instance too large: ~{estimated_leaves} leaves exceeds budget {budget}")]
    BudgetExceeded { estimated_leaves: u128, budget: u64 },

    /// No swept V meets the requested average-queue bound.
    #[error(
        "no swept V satisfies avg_queue < {mu}; smallest observed avg_queue was {min_avg_queue}"
    )]
    NoFeasibleV { mu: f64, min_avg_queue: f64 },

    /// An episode inside a sweep failed; carries the offending swept value.
    #[error("sweep failed at {parameter} = {value}: {source}")]
    SweepPoint {
        parameter: &'static str,
        value: f64,
        #[source]
        source: Box<SimError>,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
