//! Seeded generation of the exogenous processes: Rayleigh-faded channel power
//! gains (exponentially distributed), i.i.d. categorical data arrivals,
//! renewable-energy arrivals, and grid prices.
//!
//! Each process draws from its own sub-generator derived from the master
//! seed, so lengthening an episode or adding draws to one stream never
//! shifts another stream's sequence.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use crate::error::{Result, SimError};
use crate::model::ModelParams;

/// Probability mass tolerance: probs must sum to 1 within this.
const PROB_SUM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Distributions and scenario
// ---------------------------------------------------------------------------

/// A finite discrete distribution over real values.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDist {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl CategoricalDist {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let dist = CategoricalDist { values, probs };
        dist.validate("categorical")?;
        Ok(dist)
    }

    /// Point mass at `value`.
    pub fn constant(value: f64) -> Self {
        CategoricalDist {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if self.values.is_empty() {
            return Err(SimError::InvalidDistribution {
                name,
                reason: "no support points".into(),
            });
        }
        if self.values.len() != self.probs.len() {
            return Err(SimError::InvalidDistribution {
                name,
                reason: format!(
                    "{} values but {} probabilities",
                    self.values.len(),
                    self.probs.len()
                ),
            });
        }
        if self.probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(SimError::InvalidDistribution {
                name,
                reason: "negative probability".into(),
            });
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(SimError::InvalidDistribution {
                name,
                reason: format!("probabilities sum to {total}, not 1"),
            });
        }
        Ok(())
    }

    /// Expected value Σ v_k·p_k.
    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }
}

/// Everything stochastic about an episode: the channel fading mean, the three
/// arrival/price distributions, the horizon, and the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Mean of the exponential per-sub-carrier power gain (same for all
    /// sub-carriers).
    pub mean_power_gain: f64,
    /// Package arrivals A[n].
    pub data_arrivals: CategoricalDist,
    /// Renewable-energy arrivals E[n].
    pub energy_arrivals: CategoricalDist,
    /// Grid prices ξ[n]; all support points must be > 0.
    pub prices: CategoricalDist,
    /// Episode length in periods.
    pub n_end: u64,
    /// Master RNG seed; every stream seed derives from it.
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_power_gain > 0.0) {
            return Err(SimError::param("mean_power_gain", "must be > 0"));
        }
        if self.n_end == 0 {
            return Err(SimError::param("n_end", "must be ≥ 1"));
        }
        self.data_arrivals.validate("data_arrivals")?;
        self.energy_arrivals.validate("energy_arrivals")?;
        self.prices.validate("prices")?;
        if self.data_arrivals.values.iter().any(|&v| v < 0.0) {
            return Err(SimError::param("data_arrivals", "values must be ≥ 0"));
        }
        if self.energy_arrivals.values.iter().any(|&v| v < 0.0) {
            return Err(SimError::param("energy_arrivals", "values must be ≥ 0"));
        }
        if self.prices.values.iter().any(|&v| v <= 0.0) {
            return Err(SimError::param("prices", "values must be > 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sampling primitives
// ---------------------------------------------------------------------------

/// One period's channel state: `num_subcarriers` independent exponential
/// power gains with the given mean.
pub fn sample_channel<R: Rng + ?Sized>(
    num_subcarriers: usize,
    mean_gain: f64,
    rng: &mut R,
) -> Vec<f64> {
    assert!(mean_gain > 0.0, "mean_gain must be > 0");
    let exp = Exp::new(1.0 / mean_gain).expect("validated rate");
    (0..num_subcarriers).map(|_| exp.sample(rng)).collect()
}

/// Draws `values[k]` with probability `probs[k]`.
pub fn sample_categorical<R: Rng + ?Sized>(dist: &CategoricalDist, rng: &mut R) -> Result<f64> {
    dist.validate("categorical")?;
    let index = WeightedIndex::new(&dist.probs).map_err(|e| SimError::InvalidDistribution {
        name: "categorical",
        reason: e.to_string(),
    })?;
    Ok(dist.values[index.sample(rng)])
}

/// Deterministically derives a sub-seed from a master seed, a stream tag, and
/// an index. FNV-1a over the tag, then a splitmix64 finalizer; stable across
/// platforms and releases so episode traces are reproducible.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Per-episode streams
// ---------------------------------------------------------------------------

/// Pre-built categorical sampler for the hot episode loop.
#[derive(Debug, Clone)]
struct CategoricalSampler {
    values: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl CategoricalSampler {
    fn new(dist: &CategoricalDist, name: &'static str) -> Result<Self> {
        dist.validate(name)?;
        let index = WeightedIndex::new(&dist.probs).map_err(|e| SimError::InvalidDistribution {
            name,
            reason: e.to_string(),
        })?;
        Ok(CategoricalSampler {
            values: dist.values.clone(),
            index,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.values[self.index.sample(rng)]
    }
}

/// The four exogenous processes of one episode, each with its own generator.
#[derive(Debug, Clone)]
pub struct ExogenousStreams {
    num_subcarriers: usize,
    gain: Exp<f64>,
    channel_rng: ChaCha8Rng,
    data_rng: ChaCha8Rng,
    energy_rng: ChaCha8Rng,
    price_rng: ChaCha8Rng,
    data: CategoricalSampler,
    energy: CategoricalSampler,
    price: CategoricalSampler,
}

impl ExogenousStreams {
    pub fn new(num_subcarriers: usize, scenario: &ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        Ok(ExogenousStreams {
            num_subcarriers,
            gain: Exp::new(1.0 / scenario.mean_power_gain).expect("validated rate"),
            channel_rng: ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, "channel", 0)),
            data_rng: ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, "data", 0)),
            energy_rng: ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, "energy", 0)),
            price_rng: ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, "price", 0)),
            data: CategoricalSampler::new(&scenario.data_arrivals, "data_arrivals")?,
            energy: CategoricalSampler::new(&scenario.energy_arrivals, "energy_arrivals")?,
            price: CategoricalSampler::new(&scenario.prices, "prices")?,
        })
    }

    pub fn next_gains(&mut self) -> Vec<f64> {
        (0..self.num_subcarriers)
            .map(|_| self.gain.sample(&mut self.channel_rng))
            .collect()
    }

    pub fn next_data(&mut self) -> f64 {
        self.data.sample(&mut self.data_rng)
    }

    pub fn next_energy(&mut self) -> f64 {
        self.energy.sample(&mut self.energy_rng)
    }

    pub fn next_price(&mut self) -> f64 {
        self.price.sample(&mut self.price_rng)
    }
}

// ---------------------------------------------------------------------------
// Reference scenario
// ---------------------------------------------------------------------------

/// Default master seed for the reference scenario.
pub const DEFAULT_SEED: u64 = 42;

/// The reference setup used throughout the test suites: M = 3 sub-carriers,
/// τ = 1, b = 1, L = 5 channel uses, unit noise, battery capacity 2500,
/// mean power gain 0.3, arrivals {0,10,20,30 @ .1,.5,.3,.1} packages,
/// renewables {100,300,500,800 @ .1,.6,.2,.1}, prices {0.02 @ .3, 0.05 @ .7},
/// one million periods.
pub fn reference_scenario() -> (ModelParams, ScenarioConfig) {
    let params = ModelParams::new(3, 1.0, 1, 5, vec![1.0; 3], 2500.0)
        .expect("reference parameters are valid");
    let scenario = ScenarioConfig {
        mean_power_gain: 0.3,
        data_arrivals: CategoricalDist::new(vec![0.0, 10.0, 20.0, 30.0], vec![0.1, 0.5, 0.3, 0.1])
            .expect("valid"),
        energy_arrivals: CategoricalDist::new(
            vec![100.0, 300.0, 500.0, 800.0],
            vec![0.1, 0.6, 0.2, 0.1],
        )
        .expect("valid"),
        prices: CategoricalDist::new(vec![0.02, 0.05], vec![0.3, 0.7]).expect("valid"),
        n_end: 1_000_000,
        seed: DEFAULT_SEED,
    };
    scenario.validate().expect("reference scenario is valid");
    (params, scenario)
}
