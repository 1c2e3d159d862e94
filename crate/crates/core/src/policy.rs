//! Decision rules: best-sub-carrier selection, greedy renewable allocation,
//! the BGL (best-carrier / greedy-renewable / Lyapunov) controller with its
//! closed-form piecewise rate solution, and the DOP/COP baselines.
//!
//! All policies are myopic state-feedback rules: pure functions of the
//! current `SystemState` and the model parameters. Every returned action is
//! feasible by construction (Σ R ≤ Q and W·τ ≤ E_b).

use crate::error::{Result, SimError};
use crate::model::{carrier_power, Action, ModelParams, SystemState};

// ---------------------------------------------------------------------------
// Best sub-carrier selection
// ---------------------------------------------------------------------------

/// The sub-carrier a period's whole rate should ride on, with its effective
/// inverse gain η = σ²_v/H_v (power per unit of e^{θR} − 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestCarrier {
    /// 0-based index of the selected sub-carrier.
    pub index: usize,
    /// η = σ²_v/H_v, the minimum over carriers with positive gain.
    pub eta: f64,
}

/// Picks the carrier minimizing σ²_i/H_i among those with H_i > 0
/// (equivalently, maximizing H_i/σ²_i). Ties break to the lowest index so
/// episodes replay identically.
///
/// Returns [`SimError::Outage`] when every gain is zero; callers map that to
/// the all-zero action.
pub fn best_subcarrier(params: &ModelParams, gains: &[f64]) -> Result<BestCarrier> {
    if gains.len() != params.num_subcarriers {
        return Err(SimError::param(
            "gains",
            format!(
                "expected {} entries, got {}",
                params.num_subcarriers,
                gains.len()
            ),
        ));
    }
    let mut best: Option<BestCarrier> = None;
    for (i, (&gain, &sigma2)) in gains.iter().zip(&params.noise_variances).enumerate() {
        if gain <= 0.0 {
            continue;
        }
        let eta = sigma2 / gain;
        if best.is_none_or(|b| eta < b.eta) {
            best = Some(BestCarrier { index: i, eta });
        }
    }
    best.ok_or(SimError::Outage)
}

/// Rate vector with `rate` on carrier `index` and zeros elsewhere.
pub fn pack_rate_vector(num_subcarriers: usize, index: usize, rate: f64) -> Result<Vec<f64>> {
    if index >= num_subcarriers {
        return Err(SimError::param(
            "index",
            format!("carrier {index} out of range for M = {num_subcarriers}"),
        ));
    }
    if !(rate >= 0.0) {
        return Err(SimError::param("rate", format!("{rate} < 0")));
    }
    let mut rates = vec![0.0; num_subcarriers];
    rates[index] = rate;
    Ok(rates)
}

/// Greedy renewable draw: as much battery power as the period needs, never
/// more than the battery can deliver. Returns min(E_b/τ, P_needed).
pub fn greedy_renewable(battery: f64, tau: f64, power_needed: f64) -> f64 {
    debug_assert!(battery >= 0.0 && tau > 0.0 && power_needed >= 0.0);
    (battery / tau).min(power_needed)
}

// ---------------------------------------------------------------------------
// BGL controller
// ---------------------------------------------------------------------------

/// BGL tuning: the Lyapunov tradeoff weight V > 0. Large V prioritizes cost,
/// small V prioritizes queue length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BglConfig {
    pub v: f64,
}

impl BglConfig {
    pub fn new(v: f64) -> Result<Self> {
        if !(v > 0.0) {
            return Err(SimError::param("V", "must be > 0"));
        }
        Ok(BglConfig { v })
    }
}

/// Largest rate the battery alone can power: (1/θ)·ln(P_batt/η + 1) for
/// deliverable power P_batt = E_b/τ, nudged down by ulps until
/// η·(e^{θR} − 1) ≤ P_batt holds in floating point. The nudge is what makes
/// "no grid purchase" branches price to exactly zero.
pub fn battery_rate_limit(eta: f64, theta: f64, battery_power: f64) -> f64 {
    if battery_power <= 0.0 {
        return 0.0;
    }
    let mut rate = (battery_power / eta).ln_1p() / theta;
    for _ in 0..64 {
        if carrier_power(eta, theta, rate) <= battery_power {
            break;
        }
        rate = rate.next_down();
    }
    rate.max(0.0)
}

/// The two BGL thresholds for one period:
///
/// * `R_th = (1/θ)·ln(P_batt/η + 1)` — the largest rate stored renewables can
///   power (`battery_power` is E_b/τ, numerically E_b at the default τ = 1);
/// * `R_s = (1/θ)·ln(Q/(θ·V·η·ξ))` — the stationary point of the penalized
///   per-period objective. May be negative (or −∞ at Q = 0); the case
///   analysis in [`bgl_decide`] clamps it.
pub fn bgl_rate_thresholds(
    eta: f64,
    theta: f64,
    battery_power: f64,
    queue: f64,
    v: f64,
    price: f64,
) -> Result<(f64, f64)> {
    if !(eta > 0.0) {
        return Err(SimError::param("eta", "must be > 0"));
    }
    if !(theta > 0.0) {
        return Err(SimError::param("theta", "must be > 0"));
    }
    if !(v > 0.0) {
        return Err(SimError::param("V", "must be > 0"));
    }
    if !(price > 0.0) {
        return Err(SimError::param("price", "must be > 0"));
    }
    if !(battery_power >= 0.0) || !(queue >= 0.0) {
        return Err(SimError::param("state", "E_b and Q must be ≥ 0"));
    }
    let r_th = battery_rate_limit(eta, theta, battery_power);
    let r_s = (queue / (theta * v * eta * price)).ln() / theta;
    Ok((r_th, r_s))
}

/// Packs `rate` on the selected carrier and draws greedy renewable power for
/// it. Shared tail of every policy.
fn finalize(
    params: &ModelParams,
    state: &SystemState,
    best: BestCarrier,
    rate: f64,
) -> Result<Action> {
    let rates = pack_rate_vector(params.num_subcarriers, best.index, rate)?;
    let needed = carrier_power(best.eta, params.theta, rate);
    let draw = greedy_renewable(state.battery, params.period_length, needed);
    Ok(Action { rates, draw })
}

/// One BGL period: observe (H, ξ, Q, E_b), minimize
/// V·[η(e^{θR} − 1) − W̃]^+·ξ − Q·R over R ∈ [0, Q] via the closed-form case
/// analysis, then draw renewables greedily.
///
/// * `R_th ≥ Q`: the battery can power the whole buffer, R* = Q.
/// * Otherwise R* = R_s clamped to [R_th, Q].
///
/// Outage (all gains zero) and an empty buffer both yield the zero action.
pub fn bgl_decide(state: &SystemState, params: &ModelParams, cfg: &BglConfig) -> Result<Action> {
    let best = match best_subcarrier(params, &state.gains) {
        Ok(best) => best,
        Err(SimError::Outage) => return Ok(Action::zero(params.num_subcarriers)),
        Err(e) => return Err(e),
    };
    if state.queue <= 0.0 {
        // R_s diverges at Q = 0; transmitting nothing is trivially optimal.
        return Ok(Action::zero(params.num_subcarriers));
    }
    let battery_power = state.battery / params.period_length;
    let (r_th, r_s) = bgl_rate_thresholds(
        best.eta,
        params.theta,
        battery_power,
        state.queue,
        cfg.v,
        state.price,
    )?;
    let rate = if r_th >= state.queue {
        state.queue
    } else if r_s < r_th {
        r_th
    } else if r_s > state.queue {
        state.queue
    } else {
        r_s
    };
    finalize(params, state, best, rate)
}

/// Delay-optimal policy: empty the buffer through the best carrier every
/// period, buying whatever grid power the battery cannot cover.
pub fn dop_decide(state: &SystemState, params: &ModelParams) -> Result<Action> {
    let best = match best_subcarrier(params, &state.gains) {
        Ok(best) => best,
        Err(SimError::Outage) => return Ok(Action::zero(params.num_subcarriers)),
        Err(e) => return Err(e),
    };
    finalize(params, state, best, state.queue)
}

/// Cost-optimal policy: transmit only what stored renewables can power,
/// R* = min(Q, R_th); the grid purchase is exactly zero in every period.
pub fn cop_decide(state: &SystemState, params: &ModelParams) -> Result<Action> {
    let best = match best_subcarrier(params, &state.gains) {
        Ok(best) => best,
        Err(SimError::Outage) => return Ok(Action::zero(params.num_subcarriers)),
        Err(e) => return Err(e),
    };
    let battery_power = state.battery / params.period_length;
    let rate = state
        .queue
        .min(battery_rate_limit(best.eta, params.theta, battery_power));
    finalize(params, state, best, rate)
}

// ---------------------------------------------------------------------------
// Named policy dispatch
// ---------------------------------------------------------------------------

/// A selectable policy, as named in config files ("bgl" | "dop" | "cop").
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Bgl(BglConfig),
    Dop,
    Cop,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Bgl(_) => "bgl",
            Policy::Dop => "dop",
            Policy::Cop => "cop",
        }
    }

    /// Decides one period's action. With `integer_rates` the chosen rate is
    /// floored to a whole package count before the renewable draw is sized
    /// (off by default; rates are real-valued).
    pub fn decide(
        &self,
        state: &SystemState,
        params: &ModelParams,
        integer_rates: bool,
    ) -> Result<Action> {
        let action = match self {
            Policy::Bgl(cfg) => bgl_decide(state, params, cfg)?,
            Policy::Dop => dop_decide(state, params)?,
            Policy::Cop => cop_decide(state, params)?,
        };
        if !integer_rates {
            return Ok(action);
        }
        match best_subcarrier(params, &state.gains) {
            Ok(best) => finalize(params, state, best, action.total_rate().floor()),
            Err(SimError::Outage) => Ok(action),
            Err(e) => Err(e),
        }
    }
}
