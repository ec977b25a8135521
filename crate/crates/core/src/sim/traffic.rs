//! Flow descriptors and seeded per-flow arrival generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp};
use serde::{Deserialize, Serialize};

use crate::domain::{ConfigError, SliceId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Constant { value: f64 },
    Exponential { mean: f64 },
    Uniform { low: f64, high: f64 },
}

impl Distribution {
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Exponential { mean } => mean,
            Distribution::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Exponential { mean } => {
                Exp::new(1.0 / mean).expect("validated rate").sample(rng)
            }
            Distribution::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..high)
                } else {
                    low
                }
            }
        }
    }

    /// The same distribution with every draw multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Distribution::Constant { value } => Distribution::Constant {
                value: value * factor,
            },
            Distribution::Exponential { mean } => Distribution::Exponential {
                mean: mean * factor,
            },
            Distribution::Uniform { low, high } => Distribution::Uniform {
                low: low * factor,
                high: high * factor,
            },
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match *self {
            Distribution::Constant { value } => positive(value),
            Distribution::Exponential { mean } => positive(mean),
            Distribution::Uniform { low, high } => positive(low) && positive(high) && low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::new(
                "invalid_distribution",
                field,
                format!("parameters must be positive: {self:?}"),
            ))
        }
    }
}

/// One UDP-like flow feeding a slice between `start_t` and `stop_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub slice_id: SliceId,
    pub start_t: f64,
    pub stop_t: f64,
    /// Seconds between consecutive packets.
    pub inter_departure: Distribution,
    /// Bytes per packet.
    pub packet_size: Distribution,
    #[serde(default)]
    pub label: String,
}

impl FlowSpec {
    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.start_t.is_finite()
            && self.stop_t.is_finite()
            && self.start_t >= 0.0
            && self.start_t < self.stop_t)
        {
            return Err(ConfigError::new(
                "invalid_flow_window",
                format!("{field}.start_t"),
                format!(
                    "need 0 <= start_t < stop_t, got [{}, {})",
                    self.start_t, self.stop_t
                ),
            ));
        }
        self.inter_departure
            .validate(&format!("{field}.inter_departure"))?;
        self.packet_size.validate(&format!("{field}.packet_size"))
    }

    /// Mean offered load in bit/s while the flow is on.
    pub fn mean_rate_bps(&self) -> f64 {
        self.packet_size.mean() * 8.0 / self.inter_departure.mean()
    }
}

/// Arrival generator for one flow. Each flow owns an independent ChaCha
/// stream selected by its index, so adding a flow never perturbs another.
#[derive(Debug, Clone)]
pub(crate) struct FlowSource {
    pub spec: FlowSpec,
    pub slice_idx: usize,
    rng: ChaCha8Rng,
    pub next_arrival_us: Option<u64>,
    stop_us: u64,
}

pub(crate) fn secs_to_us(s: f64) -> u64 {
    (s * 1e6).round().max(0.0) as u64
}

impl FlowSource {
    pub fn new(spec: FlowSpec, slice_idx: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let start_us = secs_to_us(spec.start_t);
        let stop_us = secs_to_us(spec.stop_t);
        let mut src = Self {
            spec,
            slice_idx,
            rng,
            next_arrival_us: None,
            stop_us,
        };
        src.next_arrival_us = src.advance_from(start_us);
        src
    }

    fn advance_from(&mut self, from_us: u64) -> Option<u64> {
        let gap = secs_to_us(self.spec.inter_departure.sample(&mut self.rng)).max(1);
        let t = from_us + gap;
        (t < self.stop_us).then_some(t)
    }

    /// Pops every packet arriving strictly before `until_us`, as
    /// `(arrival_us, bytes)` pairs.
    pub fn drain_until(&mut self, until_us: u64, out: &mut Vec<(u64, u32)>) {
        while let Some(t) = self.next_arrival_us {
            if t >= until_us {
                break;
            }
            let size = self.spec.packet_size.sample(&mut self.rng).round().max(1.0) as u32;
            out.push((t, size));
            self.next_arrival_us = self.advance_from(t);
        }
    }

    pub fn rng_word(&self) -> u128 {
        self.rng.get_word_pos()
    }
}
