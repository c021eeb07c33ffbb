use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::RateSeries;
use crate::{Error, Result};

/// Geometric random walk sampled at a fixed spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Unix time of the first quote.
    pub start: i64,
    pub duration_s: i64,
    pub step_s: i64,
    pub initial_rate: f64,
    /// Log-return volatility per square-root second.
    pub volatility: f64,
    /// Log-return drift per second.
    pub drift: f64,
    pub pip_size: f64,
    /// Chance per quote that a silent stretch of `gap_s` seconds starts.
    pub gap_probability: f64,
    pub gap_s: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            // 2019-09-01T00:00:00Z
            start: 1_567_296_000,
            duration_s: 7 * 86_400,
            step_s: 10,
            initial_rate: 140.0,
            // about 1.3 pips of standard deviation per 30 s at 140
            volatility: 1.7e-5,
            drift: 0.0,
            pip_size: 0.01,
            gap_probability: 0.0,
            gap_s: 300,
        }
    }
}

pub fn synth_rates(config: &SynthConfig, seed: u64) -> Result<RateSeries> {
    if config.step_s <= 0 || config.duration_s < 0 {
        return Err(Error::InvalidParameter("step must be positive and duration non-negative".into()));
    }
    if !(config.initial_rate > 0.0) || !(config.volatility >= 0.0) {
        return Err(Error::InvalidParameter("initial rate must be positive and volatility non-negative".into()));
    }
    if !(0.0..1.0).contains(&config.gap_probability) {
        return Err(Error::InvalidParameter("gap probability must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = config.step_s as f64;
    let sd = config.volatility * dt.sqrt();
    let mu = (config.drift - 0.5 * config.volatility * config.volatility) * dt;
    let steps = config.duration_s / config.step_s + 1;
    let mut ts = Vec::with_capacity(steps as usize);
    let mut rates = Vec::with_capacity(steps as usize);
    let mut log_rate = config.initial_rate.ln();
    let mut silent_until = i64::MIN;
    for k in 0..steps {
        let t = config.start + k * config.step_s;
        if k > 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_rate += mu + sd * z;
        }
        if config.gap_probability > 0.0 && t >= silent_until && k > 0 && rng.random::<f64>() < config.gap_probability {
            silent_until = t + config.gap_s;
        }
        if t < silent_until {
            continue;
        }
        ts.push(t);
        rates.push(log_rate.exp());
    }
    RateSeries::new(ts, rates, "SYNTH", config.pip_size)
}
