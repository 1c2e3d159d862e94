//! Domain types and the deterministic per-period physics: transmit power,
//! grid-purchase cost, and the state-transition map for the data queue and
//! the renewable battery.
//!
//! Everything here is a pure function of its inputs; episodes can run
//! concurrently without shared state.

use crate::error::{Result, SimError};

/// Relative slack used when checking an action against its state's
/// feasibility set. Policies construct actions with `min`/`clamp`, so a
/// genuine violation is a bug; the slack only absorbs the one-ulp noise of
/// `(E_b/τ)·τ`-style round trips.
const FEASIBILITY_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Static physical constants of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Number of parallel flat-fading sub-carriers (M ≥ 1).
    pub num_subcarriers: usize,
    /// Period length τ in seconds. Power and per-period energy are
    /// numerically interchangeable at the default τ = 1.
    pub period_length: f64,
    /// Bits per data package (b ≥ 1).
    pub bits_per_package: u32,
    /// Channel uses per period (L ≥ 1).
    pub channel_uses: u32,
    /// Rate-to-power exponent θ = 2·ln(2)·b/L, nats per package. Derived;
    /// kept alongside b and L so hot paths don't recompute it.
    pub theta: f64,
    /// Per-sub-carrier noise variances σ²_i > 0, length `num_subcarriers`.
    pub noise_variances: Vec<f64>,
    /// Battery capacity B ≥ 0 in energy units.
    pub battery_capacity: f64,
}

impl ModelParams {
    /// Builds and validates the parameter set; θ is derived from b and L.
    pub fn new(
        num_subcarriers: usize,
        period_length: f64,
        bits_per_package: u32,
        channel_uses: u32,
        noise_variances: Vec<f64>,
        battery_capacity: f64,
    ) -> Result<Self> {
        let theta = derive_theta(bits_per_package, channel_uses)?;
        let params = ModelParams {
            num_subcarriers,
            period_length,
            bits_per_package,
            channel_uses,
            theta,
            noise_variances,
            battery_capacity,
        };
        params.validate()?;
        Ok(params)
    }

    /// Re-checks every invariant, including that θ still equals 2·ln(2)·b/L.
    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 {
            return Err(SimError::param("num_subcarriers", "must be ≥ 1"));
        }
        if !(self.period_length > 0.0) {
            return Err(SimError::param("period_length", "must be > 0"));
        }
        if self.noise_variances.len() != self.num_subcarriers {
            return Err(SimError::param(
                "noise_variances",
                format!(
                    "expected {} entries, got {}",
                    self.num_subcarriers,
                    self.noise_variances.len()
                ),
            ));
        }
        if self.noise_variances.iter().any(|&s| !(s > 0.0)) {
            return Err(SimError::param("noise_variances", "all σ² must be > 0"));
        }
        if !(self.battery_capacity >= 0.0) {
            return Err(SimError::param("battery_capacity", "must be ≥ 0"));
        }
        let expected = derive_theta(self.bits_per_package, self.channel_uses)?;
        if self.theta != expected {
            return Err(SimError::param(
                "theta",
                format!("stored {} but 2·ln(2)·b/L = {}", self.theta, expected),
            ));
        }
        Ok(())
    }
}

/// Dynamic state observed at the beginning of a period.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// Period index n ≥ 0.
    pub period: u64,
    /// Channel power gains H_i[n] ≥ 0, length M.
    pub gains: Vec<f64>,
    /// Data buffer length Q[n] in packages (real-valued, ≥ 0).
    pub queue: f64,
    /// Stored renewable energy E_b[n] ∈ [0, B].
    pub battery: f64,
    /// Grid power price ξ[n] > 0 for this period.
    pub price: f64,
}

impl SystemState {
    /// Builds and validates an initial or intermediate state.
    pub fn new(period: u64, gains: Vec<f64>, queue: f64, battery: f64, price: f64) -> Result<Self> {
        let state = SystemState {
            period,
            gains,
            queue,
            battery,
            price,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.iter().any(|&h| !(h >= 0.0)) {
            return Err(SimError::param("gains", "all H_i must be ≥ 0"));
        }
        if !(self.queue >= 0.0) {
            return Err(SimError::param("queue", "must be ≥ 0"));
        }
        if !(self.battery >= 0.0) {
            return Err(SimError::param("battery", "must be ≥ 0"));
        }
        if !(self.price > 0.0) {
            return Err(SimError::param("price", "must be > 0"));
        }
        Ok(())
    }
}

/// A controller decision for one period: a per-carrier rate vector and the
/// power drawn from the battery.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    /// Packages scheduled per sub-carrier, R_i[n] ≥ 0.
    pub rates: Vec<f64>,
    /// Renewable power draw W[n] ≥ 0; the action is feasible only while
    /// W·τ ≤ E_b of the state it was computed for.
    pub draw: f64,
}

impl Action {
    /// The all-zero action (declared outage or empty buffer).
    pub fn zero(num_subcarriers: usize) -> Self {
        Action {
            rates: vec![0.0; num_subcarriers],
            draw: 0.0,
        }
    }

    /// Total scheduled packages R[n] = Σ_i R_i[n].
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Exogenous draws applied while stepping from period n to n + 1.
#[derive(Debug, Clone)]
pub struct Arrivals {
    /// Packages A[n] generated at the end of the period.
    pub data: f64,
    /// Renewable energy E[n] harvested during the period.
    pub energy: f64,
    /// Channel gains revealed for period n + 1.
    pub next_gains: Vec<f64>,
    /// Grid price revealed for period n + 1.
    pub next_price: f64,
}

/// Everything the transition produces for one period.
#[derive(Debug, Clone)]
pub struct PeriodOutcome {
    /// Total transmit power P[n].
    pub power: f64,
    /// Purchased grid power (P[n] − W[n])^+.
    pub grid_power: f64,
    /// Purchase cost C[n] = P_grid[n]·ξ[n].
    pub cost: f64,
    /// State at the beginning of period n + 1, arrivals applied.
    pub next_state: SystemState,
}

// ---------------------------------------------------------------------------
// Per-period physics
// ---------------------------------------------------------------------------

/// Rate-to-power exponent θ = 2·ln(2)·b/L in nats per package.
pub fn derive_theta(bits_per_package: u32, channel_uses: u32) -> Result<f64> {
    if bits_per_package == 0 {
        return Err(SimError::param("bits_per_package", "must be ≥ 1"));
    }
    if channel_uses == 0 {
        return Err(SimError::param("channel_uses", "must be ≥ 1"));
    }
    Ok(2.0 * std::f64::consts::LN_2 * f64::from(bits_per_package) / f64::from(channel_uses))
}

/// Power needed to move `rate` packages through one carrier with effective
/// inverse gain `eta` = σ²/H: η·(e^{θR} − 1).
///
/// This is the single shared primitive: policies, the transition map, and
/// the oracles all price power through it, so a policy that sets
/// W = min(E_b/τ, P) yields a bit-exact zero grid purchase.
#[inline]
pub fn carrier_power(eta: f64, theta: f64, rate: f64) -> f64 {
    eta * (theta * rate).exp_m1()
}

/// Total transmit power Σ_i (σ²_i/H_i)·(e^{θ·R_i} − 1).
///
/// Zero-rate carriers contribute nothing even when their gain is zero; a
/// positive rate on a zero-gain carrier is infeasible.
pub fn transmit_power(params: &ModelParams, gains: &[f64], rates: &[f64]) -> Result<f64> {
    if gains.len() != params.num_subcarriers || rates.len() != params.num_subcarriers {
        return Err(SimError::param(
            "rates/gains",
            format!(
                "expected {} sub-carriers, got gains {} and rates {}",
                params.num_subcarriers,
                gains.len(),
                rates.len()
            ),
        ));
    }
    let mut total = 0.0;
    for (i, (&rate, &gain)) in rates.iter().zip(gains).enumerate() {
        if !(rate >= 0.0) {
            return Err(SimError::param("rates", format!("R_{i} = {rate} < 0")));
        }
        if rate == 0.0 {
            continue;
        }
        if gain <= 0.0 {
            return Err(SimError::InfeasibleRate { carrier: i, rate });
        }
        total += carrier_power(params.noise_variances[i] / gain, params.theta, rate);
    }
    Ok(total)
}

/// Purchased grid power (P − W)^+.
#[inline]
pub fn grid_power(total_power: f64, renewable_draw: f64) -> f64 {
    (total_power - renewable_draw).max(0.0)
}

/// Purchase cost P_grid·ξ.
#[inline]
pub fn period_cost(grid: f64, price: f64) -> f64 {
    grid * price
}

/// Queue recursion Q[n+1] = (Q[n] − R[n])^+ + A[n].
#[inline]
pub fn next_queue(queue: f64, total_rate: f64, data_arrival: f64) -> f64 {
    (queue - total_rate).max(0.0) + data_arrival
}

/// Battery recursion E_b[n+1] = min{(E_b[n] − W[n]·τ)^+ + E[n], B}.
#[inline]
pub fn next_battery(battery: f64, draw: f64, tau: f64, harvested: f64, capacity: f64) -> f64 {
    ((battery - draw * tau).max(0.0) + harvested).min(capacity)
}

/// Advances one period: prices the action against the current state, applies
/// the queue and battery recursions, and installs the exogenous draws for the
/// next period.
///
/// Rejects actions outside the feasibility set (Σ R ≤ Q, W·τ ≤ E_b); the
/// provided policies never trigger this, so an error here is a policy bug.
pub fn step(
    params: &ModelParams,
    state: &SystemState,
    action: &Action,
    arrivals: &Arrivals,
) -> Result<PeriodOutcome> {
    let total_rate = action.total_rate();
    if total_rate - state.queue > FEASIBILITY_SLACK * (1.0 + state.queue) {
        return Err(SimError::InfeasibleAction {
            period: state.period,
            reason: format!("ΣR = {} exceeds Q = {}", total_rate, state.queue),
        });
    }
    if !(action.draw >= 0.0) {
        return Err(SimError::InfeasibleAction {
            period: state.period,
            reason: format!("W = {} < 0", action.draw),
        });
    }
    let drained = action.draw * params.period_length;
    if drained - state.battery > FEASIBILITY_SLACK * (1.0 + state.battery) {
        return Err(SimError::InfeasibleAction {
            period: state.period,
            reason: format!("W·τ = {} exceeds E_b = {}", drained, state.battery),
        });
    }
    if !(arrivals.data >= 0.0) || !(arrivals.energy >= 0.0) {
        return Err(SimError::param("arrivals", "A and E must be ≥ 0"));
    }

    let power = transmit_power(params, &state.gains, &action.rates)?;
    let grid = grid_power(power, action.draw);
    let cost = period_cost(grid, state.price);

    let next_state = SystemState::new(
        state.period + 1,
        arrivals.next_gains.clone(),
        next_queue(state.queue, total_rate, arrivals.data),
        next_battery(
            state.battery,
            action.draw,
            params.period_length,
            arrivals.energy,
            params.battery_capacity,
        ),
        arrivals.next_price,
    )?;

    Ok(PeriodOutcome {
        power,
        grid_power: grid,
        cost,
        next_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_params() -> ModelParams {
        ModelParams::new(3, 1.0, 1, 5, vec![1.0; 3], 2500.0).unwrap()
    }

    fn single_carrier_params() -> ModelParams {
        ModelParams::new(1, 1.0, 1, 5, vec![1.0], 100.0).unwrap()
    }

    #[test]
    fn theta_matches_closed_form() {
        // 2·ln2/5
        let theta = derive_theta(1, 5).unwrap();
        assert!((theta - 0.277_258_872_2).abs() < 1e-9);
    }

    #[test]
    fn theta_is_scale_invariant_in_b_over_l() {
        assert_eq!(derive_theta(1, 5).unwrap(), derive_theta(2, 10).unwrap());
    }

    #[test]
    fn theta_rejects_zero_inputs() {
        assert!(derive_theta(0, 5).is_err());
        assert!(derive_theta(1, 0).is_err());
    }

    #[test]
    fn params_reject_bad_noise_and_capacity() {
        assert!(ModelParams::new(3, 1.0, 1, 5, vec![1.0, 1.0], 10.0).is_err());
        assert!(ModelParams::new(3, 1.0, 1, 5, vec![1.0, 0.0, 1.0], 10.0).is_err());
        assert!(ModelParams::new(3, 1.0, 1, 5, vec![1.0; 3], -1.0).is_err());
        assert!(ModelParams::new(3, 0.0, 1, 5, vec![1.0; 3], 10.0).is_err());
    }

    #[test]
    fn params_validate_catches_stale_theta() {
        let mut p = reference_params();
        p.theta = 0.3;
        assert!(p.validate().is_err());
    }

    #[test]
    fn transmit_power_zero_rates_cost_nothing() {
        let p = reference_params();
        let power = transmit_power(&p, &[0.5, 1.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(power, 0.0);
    }

    #[test]
    fn transmit_power_matches_hand_values() {
        // e^{θR} = 2^{2bR/L}; R = 10 → 2^4 − 1 = 15, R = 5 → 2^2 − 1 = 3.
        let p = single_carrier_params();
        let p10 = transmit_power(&p, &[1.0], &[10.0]).unwrap();
        assert!((p10 - 15.0).abs() < 1e-9, "got {p10}");
        let p5 = transmit_power(&p, &[1.0], &[5.0]).unwrap();
        assert!((p5 - 3.0).abs() < 1e-9, "got {p5}");
    }

    #[test]
    fn transmit_power_rejects_rate_on_dead_carrier() {
        let p = reference_params();
        let err = transmit_power(&p, &[0.0, 1.0, 1.0], &[1.0, 0.0, 0.0]);
        assert!(matches!(
            err,
            Err(SimError::InfeasibleRate { carrier: 0, .. })
        ));
    }

    #[test]
    fn transmit_power_rejects_dimension_mismatch() {
        let p = reference_params();
        assert!(transmit_power(&p, &[1.0, 1.0], &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn grid_power_clamps_at_zero() {
        assert_eq!(grid_power(15.0, 20.0), 0.0);
        assert_eq!(grid_power(15.0, 0.0), 15.0);
        assert_eq!(grid_power(15.0, 6.0), 9.0);
    }

    #[test]
    fn period_cost_is_price_times_grid() {
        assert_eq!(period_cost(0.0, 0.05), 0.0);
        assert!((period_cost(9.0, 0.05) - 0.45).abs() < 1e-12);
        assert!((period_cost(9.0, 0.02) - 0.18).abs() < 1e-12);
    }

    #[test]
    fn queue_recursion_clamps_then_adds_arrivals() {
        assert_eq!(next_queue(5.0, 10.0, 3.0), 3.0);
        assert_eq!(next_queue(10.0, 4.0, 0.0), 6.0);
    }

    #[test]
    fn battery_recursion_honours_capacity() {
        assert_eq!(next_battery(10.0, 4.0, 1.0, 3.0, 12.0), 9.0);
        assert_eq!(next_battery(10.0, 4.0, 1.0, 30.0, 12.0), 12.0);
    }

    #[test]
    fn step_advances_queue_battery_and_price() {
        let p = single_carrier_params();
        let state = SystemState::new(7, vec![1.0], 10.0, 6.0, 0.05).unwrap();
        let action = Action {
            rates: vec![5.0],
            draw: 3.0,
        };
        let arrivals = Arrivals {
            data: 20.0,
            energy: 4.0,
            next_gains: vec![0.7],
            next_price: 0.02,
        };
        let out = step(&p, &state, &action, &arrivals).unwrap();
        assert!((out.power - 3.0).abs() < 1e-9);
        assert_eq!(out.grid_power, out.power - 3.0);
        assert!((out.cost - out.grid_power * 0.05).abs() < 1e-12);
        assert_eq!(out.next_state.period, 8);
        assert_eq!(out.next_state.queue, 25.0);
        assert_eq!(out.next_state.battery, 7.0);
        assert_eq!(out.next_state.price, 0.02);
        assert_eq!(out.next_state.gains, vec![0.7]);
    }

    #[test]
    fn step_rejects_infeasible_actions() {
        let p = single_carrier_params();
        let state = SystemState::new(0, vec![1.0], 5.0, 2.0, 0.05).unwrap();
        let arrivals = Arrivals {
            data: 0.0,
            energy: 0.0,
            next_gains: vec![1.0],
            next_price: 0.05,
        };

        let too_much_rate = Action {
            rates: vec![6.0],
            draw: 0.0,
        };
        assert!(matches!(
            step(&p, &state, &too_much_rate, &arrivals),
            Err(SimError::InfeasibleAction { .. })
        ));

        let too_much_draw = Action {
            rates: vec![1.0],
            draw: 3.0,
        };
        assert!(matches!(
            step(&p, &state, &too_much_draw, &arrivals),
            Err(SimError::InfeasibleAction { .. })
        ));
    }

    #[test]
    fn step_is_deterministic() {
        let p = reference_params();
        let state = SystemState::new(0, vec![0.4, 0.9, 0.1], 12.0, 40.0, 0.02).unwrap();
        let action = Action {
            rates: vec![0.0, 8.0, 0.0],
            draw: 11.0,
        };
        let arrivals = Arrivals {
            data: 10.0,
            energy: 300.0,
            next_gains: vec![0.2, 0.3, 0.4],
            next_price: 0.05,
        };
        let a = step(&p, &state, &action, &arrivals).unwrap();
        let b = step(&p, &state, &action, &arrivals).unwrap();
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.next_state, b.next_state);
    }
}
