//! Episode runner and parameter sweeps: accumulates the time-average cost and
//! queue metrics over an episode and drives sweeps over V, the mean channel
//! gain, or the battery capacity.
//!
//! Episodes inside a sweep run concurrently; each owns its generators and the
//! result table is ordered by (swept value, replication), never by completion
//! order, so outputs are reproducible.

use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::model::{step, Arrivals, ModelParams, SystemState};
use crate::policy::{BglConfig, Policy};
use crate::stochastic::{derive_seed, ExogenousStreams, ScenarioConfig};

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

/// Downsampled record of one period, kept when trajectories are requested.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub period: u64,
    pub queue: f64,
    pub battery: f64,
    pub cost: f64,
    pub rate: f64,
}

/// Time-averaged results of one episode. Averages are (1/n_end)·Σ over
/// periods 0 ..= n_end − 1; the queue constraint is reported, never enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    /// Average grid-purchase cost per period.
    pub avg_cost: f64,
    /// Average buffer length (delay proxy).
    pub avg_queue: f64,
    /// Largest buffer length observed (diagnostic; the buffer is uncapped).
    pub max_queue: f64,
    /// Average purchased grid power per period.
    pub avg_grid_power: f64,
    /// Every k-th period, when requested.
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Knobs that do not change the model: integer-rate rounding and trajectory
/// recording.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Floor every policy rate to whole packages (off by default).
    pub integer_rates: bool,
    /// Record every k-th period into the trajectory (None = no trajectory).
    pub trajectory_stride: Option<u64>,
}

/// Runs one episode: reveal (H, ξ), let the policy decide, step the physics
/// with freshly sampled arrivals, accumulate averages. Initial conditions are
/// Q[0] = 0 and E_b[0] = 0.
pub fn run_episode(
    params: &ModelParams,
    scenario: &ScenarioConfig,
    policy: &Policy,
    options: &RunOptions,
) -> Result<EpisodeMetrics> {
    params.validate()?;
    scenario.validate()?;
    let mut streams = ExogenousStreams::new(params.num_subcarriers, scenario)?;
    let mut state = SystemState::new(0, streams.next_gains(), 0.0, 0.0, streams.next_price())?;

    let n_end = scenario.n_end;
    let mut cost_sum = 0.0;
    let mut queue_sum = 0.0;
    let mut grid_sum = 0.0;
    let mut max_queue = 0.0f64;
    let mut trajectory = options.trajectory_stride.map(|_| Vec::new());

    for n in 0..n_end {
        queue_sum += state.queue;
        max_queue = max_queue.max(state.queue);

        let action = policy.decide(&state, params, options.integer_rates)?;
        let arrivals = Arrivals {
            data: streams.next_data(),
            energy: streams.next_energy(),
            next_gains: streams.next_gains(),
            next_price: streams.next_price(),
        };
        let outcome = step(params, &state, &action, &arrivals)?;

        cost_sum += outcome.cost;
        grid_sum += outcome.grid_power;
        if let (Some(points), Some(stride)) = (trajectory.as_mut(), options.trajectory_stride) {
            if stride > 0 && n % stride == 0 {
                points.push(TrajectoryPoint {
                    period: n,
                    queue: state.queue,
                    battery: state.battery,
                    cost: outcome.cost,
                    rate: action.total_rate(),
                });
            }
        }
        state = outcome.next_state;
    }

    let periods = n_end as f64;
    Ok(EpisodeMetrics {
        avg_cost: cost_sum / periods,
        avg_queue: queue_sum / periods,
        max_queue,
        avg_grid_power: grid_sum / periods,
        trajectory,
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Which scalar a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// BGL tradeoff weight V (ignored by DOP/COP).
    TradeoffV,
    /// Mean exponential channel power gain.
    MeanGain,
    /// Battery capacity B.
    BatteryCapacity,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::TradeoffV => "V",
            SweepParameter::MeanGain => "mean_gain",
            SweepParameter::BatteryCapacity => "battery_B",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(SweepParameter::TradeoffV),
            "mean_gain" => Ok(SweepParameter::MeanGain),
            "battery_B" => Ok(SweepParameter::BatteryCapacity),
            other => Err(SimError::param(
                "sweep",
                format!("'{other}' is not a sweep parameter (expected V | mean_gain | battery_B)"),
            )),
        }
    }
}

/// A sweep: the base configuration plus the swept values and replication
/// count. Replication r uses seed derive(base_seed, r) for every swept value
/// (common random numbers), so curves at different values are directly
/// comparable and DOP/COP columns are V-invariant.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub replications: u32,
    pub params: ModelParams,
    pub scenario: ScenarioConfig,
    pub policy: Policy,
    pub options: RunOptions,
}

impl SweepSpec {
    /// Resolves the configuration at one swept value.
    fn at_value(&self, value: f64) -> Result<(ModelParams, ScenarioConfig, Policy)> {
        let mut params = self.params.clone();
        let mut scenario = self.scenario.clone();
        let mut policy = self.policy.clone();
        match self.parameter {
            SweepParameter::TradeoffV => {
                if let Policy::Bgl(cfg) = &mut policy {
                    *cfg = BglConfig::new(value)?;
                }
            }
            SweepParameter::MeanGain => scenario.mean_power_gain = value,
            SweepParameter::BatteryCapacity => params.battery_capacity = value,
        }
        params.validate()?;
        scenario.validate()?;
        Ok((params, scenario, policy))
    }
}

/// One sweep row: a swept value, a replication, its derived seed, and the
/// episode metrics.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub swept_value: f64,
    pub replication: u32,
    pub seed: u64,
    pub metrics: EpisodeMetrics,
}

/// Sweep results ordered by (value index, replication).
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Renders the table as CSV: comma-separated, header row, `.` decimals,
    /// LF line endings. The byte-exact contract for golden-file comparisons.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "swept_value,replication,avg_cost,avg_queue,max_queue,avg_grid_power,seed\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.swept_value,
                row.replication,
                row.metrics.avg_cost,
                row.metrics.avg_queue,
                row.metrics.max_queue,
                row.metrics.avg_grid_power,
                row.seed,
            ));
        }
        out
    }

    /// Replication-averaged (value, avg_queue, avg_cost) triples in value
    /// order.
    pub fn value_means(&self) -> Vec<(f64, f64, f64)> {
        let mut means = Vec::new();
        for row in &self.rows {
            match means.last_mut() {
                Some((value, queue_sum, cost_sum)) if *value == row.swept_value => {
                    *queue_sum += row.metrics.avg_queue;
                    *cost_sum += row.metrics.avg_cost;
                }
                _ => means.push((row.swept_value, row.metrics.avg_queue, row.metrics.avg_cost)),
            }
        }
        let reps = self.rows.len() as f64 / means.len() as f64;
        means
            .into_iter()
            .map(|(v, q, c)| (v, q / reps, c / reps))
            .collect()
    }
}

/// Runs one episode per (swept value, replication) pair, in parallel, and
/// returns the ordered table.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    if spec.values.is_empty() {
        return Err(SimError::param("values", "sweep needs at least one value"));
    }
    if spec.replications == 0 {
        return Err(SimError::param("replications", "must be ≥ 1"));
    }

    let jobs: Vec<(f64, u32)> = spec
        .values
        .iter()
        .flat_map(|&value| (0..spec.replications).map(move |rep| (value, rep)))
        .collect();

    let rows: Result<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(value, rep)| {
            let run = || -> Result<SweepRow> {
                let (params, mut scenario, policy) = spec.at_value(value)?;
                scenario.seed = derive_seed(spec.scenario.seed, "replication", u64::from(rep));
                let metrics = run_episode(&params, &scenario, &policy, &spec.options)?;
                Ok(SweepRow {
                    swept_value: value,
                    replication: rep,
                    seed: scenario.seed,
                    metrics,
                })
            };
            run().map_err(|source| SimError::SweepPoint {
                parameter: spec.parameter.name(),
                value,
                source: Box::new(source),
            })
        })
        .collect();

    Ok(SweepTable {
        parameter: spec.parameter,
        rows: rows?,
    })
}

/// Largest swept V whose replication-averaged queue length stays below `mu`.
/// The sweep must be over V with ascending values.
pub fn find_max_v_for_delay(spec: &SweepSpec, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(SimError::param("mu", "must be > 0"));
    }
    if spec.parameter != SweepParameter::TradeoffV {
        return Err(SimError::param("parameter", "delay search sweeps V"));
    }
    if spec.values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::param("values", "must be sorted ascending"));
    }
    let table = run_sweep(spec)?;
    let means = table.value_means();
    let mut min_queue = f64::INFINITY;
    for &(value, avg_queue, _) in means.iter().rev() {
        if avg_queue < mu {
            return Ok(value);
        }
        min_queue = min_queue.min(avg_queue);
    }
    Err(SimError::NoFeasibleV {
        mu,
        min_avg_queue: min_queue,
    })
}
