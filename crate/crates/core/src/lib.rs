//! Discrete-period simulator and policy engine for a multi-carrier wireless
//! transmitter powered by a finite renewable battery with grid fallback.
//!
//! Each period the transmitter observes the channel gains, the grid price,
//! its data buffer, and its battery, then picks a per-carrier rate vector and
//! a renewable power draw; whatever transmit power the battery cannot cover
//! is purchased from the grid. The crate provides:
//!
//! * [`model`] — domain types and the pure per-period physics (power, cost,
//!   queue and battery recursions);
//! * [`policy`] — the BGL online controller (best sub-carrier, greedy
//!   renewable draw, closed-form Lyapunov rate choice) and the DOP/COP
//!   baselines;
//! * [`stochastic`] — seeded exogenous streams: exponential channel gains,
//!   categorical arrivals, energies, and prices;
//! * [`oracle`] — brute-force verifiers: grid search over the per-period
//!   objective, split-dominance tests, and an exhaustive small-horizon
//!   optimizer with a greedy-counterexample search;
//! * [`harness`] — episode runner, time-average metrics, and parameter
//!   sweeps emitted as CSV.

// `!(x > 0.0)` is used throughout validation to reject NaN along with
// non-positive values in one comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod stochastic;

pub use error::{Result, SimError};
pub use harness::{
    run_episode, run_sweep, EpisodeMetrics, RunOptions, SweepParameter, SweepSpec, SweepTable,
};
pub use model::{Action, ModelParams, PeriodOutcome, SystemState};
pub use policy::{BglConfig, Policy};
pub use stochastic::{reference_scenario, CategoricalDist, ScenarioConfig};
