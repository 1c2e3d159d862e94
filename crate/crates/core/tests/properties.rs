//! Property tests for the structural invariants: feasibility of every policy,
//! trajectory bounds under arbitrary feasible actions, convexity of the power
//! formula, closed-form/grid agreement, and the oracle orderings.

use proptest::prelude::*;

use greenlink::model::{
    next_queue, step, transmit_power, Action, Arrivals, ModelParams, SystemState,
};
use greenlink::oracle::{
    bgl_objective, grid_min_bgl_objective, horizon_cost, HorizonInstance, RenewableAllocation,
};
use greenlink::policy::{best_subcarrier, bgl_decide, cop_decide, dop_decide, BglConfig, Policy};
use greenlink::stochastic::reference_scenario;
use greenlink::{run_episode, RunOptions};

fn params_m3() -> ModelParams {
    ModelParams::new(3, 1.0, 1, 5, vec![1.0; 3], 2500.0).unwrap()
}

fn arb_gain() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 9 => 0.001..2.0f64]
}

fn arb_state() -> impl Strategy<Value = SystemState> {
    (
        prop::collection::vec(arb_gain(), 3),
        prop_oneof![1 => Just(0.0), 9 => 0.0..60.0f64],
        0.0..2500.0f64,
        0.005..0.1f64,
    )
        .prop_map(|(gains, queue, battery, price)| {
            SystemState::new(0, gains, queue, battery, price).unwrap()
        })
}

fn arb_v() -> impl Strategy<Value = f64> {
    (-3.0..4.0f64).prop_map(|e| 10f64.powf(e))
}

fn action_is_feasible(action: &Action, state: &SystemState) {
    assert!(action.rates.iter().all(|&r| r >= 0.0));
    assert!(action.total_rate() <= state.queue, "ΣR > Q");
    assert!(action.draw >= 0.0);
    assert!(action.draw <= state.battery, "W·τ > E_b (τ = 1 here)");
}

proptest! {
    // Every policy's action stays inside the feasibility set, and the greedy
    // draw never exceeds the power the action actually needs.
    #[test]
    fn policies_only_emit_feasible_actions(state in arb_state(), v in arb_v()) {
        let params = params_m3();
        for action in [
            bgl_decide(&state, &params, &BglConfig::new(v).unwrap()).unwrap(),
            dop_decide(&state, &params).unwrap(),
            cop_decide(&state, &params).unwrap(),
        ] {
            action_is_feasible(&action, &state);
            let needed = transmit_power(&params, &state.gains, &action.rates).unwrap();
            prop_assert!(action.draw <= needed + 1e-9 * (1.0 + needed));
        }
    }

    // COP prices to exactly zero in every state; DOP leaves exactly the fresh
    // arrivals in the buffer.
    #[test]
    fn cop_is_free_and_dop_empties(state in arb_state(), data in 0.0..40.0f64) {
        let params = params_m3();

        let cop = cop_decide(&state, &params).unwrap();
        let power = transmit_power(&params, &state.gains, &cop.rates).unwrap();
        prop_assert_eq!((power - cop.draw).max(0.0), 0.0);

        let dop = dop_decide(&state, &params).unwrap();
        if state.gains.iter().any(|&h| h > 0.0) {
            prop_assert_eq!(next_queue(state.queue, dop.total_rate(), data), data);
        }
    }

    // The chosen rate never increases with V, and the limits recover DOP and
    // COP behaviour.
    #[test]
    fn bgl_rate_is_monotone_in_v(state in arb_state(), a in arb_v(), b in arb_v()) {
        let params = params_m3();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = bgl_decide(&state, &params, &BglConfig::new(lo).unwrap())
            .unwrap()
            .total_rate();
        let r_hi = bgl_decide(&state, &params, &BglConfig::new(hi).unwrap())
            .unwrap()
            .total_rate();
        prop_assert!(r_lo >= r_hi - 1e-12);
    }

    #[test]
    fn bgl_limits_recover_dop_and_cop(state in arb_state()) {
        let params = params_m3();

        // V → 0⁺ drains the whole buffer, exactly like DOP.
        let tiny_v = bgl_decide(&state, &params, &BglConfig::new(1e-12).unwrap()).unwrap();
        let dop = dop_decide(&state, &params).unwrap();
        prop_assert_eq!(tiny_v, dop);

        // V large forces R* = R_th with zero grid purchase, exactly like COP.
        let huge_v = bgl_decide(&state, &params, &BglConfig::new(1e15).unwrap()).unwrap();
        let cop = cop_decide(&state, &params).unwrap();
        prop_assert_eq!(huge_v.rates.clone(), cop.rates.clone());
        let power = transmit_power(&params, &state.gains, &huge_v.rates).unwrap();
        prop_assert_eq!((power - huge_v.draw).max(0.0), 0.0);
    }

    // Closed form against the grid oracle: the closed form is never beaten by
    // a grid point, and the grid minimum tracks it within the resolution.
    #[test]
    fn closed_form_matches_grid_minimum(state in arb_state(), v in arb_v()) {
        let params = params_m3();
        let cfg = BglConfig::new(v).unwrap();
        let action = bgl_decide(&state, &params, &cfg).unwrap();
        let step = (state.queue / 2000.0).max(1e-9);
        let grid = grid_min_bgl_objective(&state, &params, &cfg, step).unwrap();

        let closed = match best_subcarrier(&params, &state.gains) {
            Ok(best) => bgl_objective(
                best.eta,
                params.theta,
                state.queue,
                state.battery,
                v,
                state.price,
                action.total_rate(),
            ),
            Err(_) => 0.0,
        };

        let band = 1e-6 * (1.0 + grid.min_objective.abs());
        prop_assert!(closed <= grid.min_objective + band, "a grid point beat the closed form");
        let resolution = params.theta * state.queue * step * step + band;
        prop_assert!(grid.min_objective <= closed + resolution, "grid strayed from the closed form");
        prop_assert!((grid.argmin - action.total_rate()).abs() <= step + 1e-9);
    }

    // Halving the grid step evaluates a superset of points, so the minimum
    // can only improve.
    #[test]
    fn grid_refinement_is_monotone(state in arb_state(), v in arb_v()) {
        let params = params_m3();
        let cfg = BglConfig::new(v).unwrap();
        let coarse = grid_min_bgl_objective(&state, &params, &cfg, 0.5).unwrap();
        let fine = grid_min_bgl_objective(&state, &params, &cfg, 0.25).unwrap();
        prop_assert!(fine.min_objective <= coarse.min_objective);
    }

    // Transmit power is strictly increasing and convex in each per-carrier
    // rate (checked by finite differences).
    #[test]
    fn power_is_increasing_and_convex(
        gain in 0.05..2.0f64,
        rate in 0.5..25.0f64,
        h in 0.01..0.4f64,
    ) {
        let params = params_m3();
        let gains = vec![gain, 1.0, 1.0];
        let at = |r: f64| transmit_power(&params, &gains, &[r, 0.0, 0.0]).unwrap();
        let (lo, mid, hi) = (at(rate - h), at(rate), at(rate + h));
        prop_assert!(hi > mid && mid > lo);
        prop_assert!(hi - 2.0 * mid + lo >= -1e-9);
    }

    // Arbitrary feasible action sequences keep the state inside its bounds
    // and never source more battery energy than was ever stored.
    #[test]
    fn trajectories_respect_bounds_and_energy(
        seq in prop::collection::vec(
            (0.0..1.0f64, 0.0..1.0f64, 0.0..30.0f64, 0.0..600.0f64,
             prop::collection::vec(arb_gain(), 3), 0.005..0.1f64),
            1..40,
        )
    ) {
        let params = params_m3();
        let mut state = SystemState::new(0, vec![0.4, 0.9, 0.1], 10.0, 50.0, 0.05).unwrap();
        let mut drawn = 0.0;
        let mut harvested = state.battery;

        for (rate_frac, draw_frac, data, energy, gains, price) in seq {
            // Random feasible action: a slice of the queue on the best live
            // carrier, a slice of the battery as the draw.
            let action = match best_subcarrier(&params, &state.gains) {
                Ok(best) => Action {
                    rates: greenlink::policy::pack_rate_vector(
                        3,
                        best.index,
                        rate_frac * state.queue,
                    )
                    .unwrap(),
                    draw: draw_frac * state.battery,
                },
                Err(_) => Action::zero(3),
            };
            let arrivals = Arrivals { data, energy, next_gains: gains, next_price: price };
            let out = step(&params, &state, &action, &arrivals).unwrap();

            prop_assert!(out.cost >= 0.0);
            drawn += action.draw * params.period_length;
            harvested += energy;
            state = out.next_state;
            prop_assert!(state.queue >= 0.0);
            prop_assert!(state.battery >= 0.0 && state.battery <= params.battery_capacity);
        }
        prop_assert!(drawn <= harvested + 1e-9);
    }

    // Greedy is one of the enumerated strategies, so the exhaustive optimum
    // can never exceed it.
    #[test]
    fn exhaustive_never_exceeds_greedy(
        horizon in 1usize..=3,
        seed_prices in prop::collection::vec(0.01..1.0f64, 3),
        seed_etas in prop::collection::vec(0.3..5.0f64, 3),
        q0 in 2.0..12.0f64,
        eb0 in 0.0..6.0f64,
    ) {
        let instance = HorizonInstance {
            horizon,
            etas: seed_etas[..horizon].to_vec(),
            prices: seed_prices[..horizon].to_vec(),
            data_arrivals: vec![5.0; horizon],
            energy_arrivals: vec![1.0; horizon],
            initial_queue: q0,
            initial_battery: eb0,
            battery_capacity: 25.0,
            theta: 2.0 * std::f64::consts::LN_2 / 5.0,
            lambda: 0.01,
            rate_step: (q0 + 5.0 * horizon as f64) / 8.0,
            energy_step: 1.0,
        };
        let greedy = horizon_cost(&instance, RenewableAllocation::Greedy).unwrap();
        let exhaustive = horizon_cost(&instance, RenewableAllocation::Exhaustive).unwrap();
        prop_assert!(exhaustive <= greedy + 1e-9);
    }
}

// Same seed, same trace: episode metrics replay bit-identically.
#[test]
fn episodes_replay_bit_identically() {
    let (params, mut scenario) = reference_scenario();
    scenario.n_end = 5_000;
    for policy in [
        Policy::Bgl(BglConfig::new(100.0).unwrap()),
        Policy::Dop,
        Policy::Cop,
    ] {
        let a = run_episode(&params, &scenario, &policy, &RunOptions::default()).unwrap();
        let b = run_episode(&params, &scenario, &policy, &RunOptions::default()).unwrap();
        assert_eq!(a, b, "{}", policy.name());
    }
}

// Different seeds must actually change the trace.
#[test]
fn seeds_matter() {
    let (params, mut scenario) = reference_scenario();
    scenario.n_end = 5_000;
    let a = run_episode(&params, &scenario, &Policy::Dop, &RunOptions::default()).unwrap();
    scenario.seed ^= 1;
    let b = run_episode(&params, &scenario, &Policy::Dop, &RunOptions::default()).unwrap();
    assert_ne!(a.avg_cost, b.avg_cost);
}
