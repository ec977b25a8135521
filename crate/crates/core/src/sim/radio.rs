use serde::{Deserialize, Serialize};

use crate::domain::{ConfigError, SliceId};

/// Abstract downlink PHY: a PRB budget per TTI and a per-slice byte yield per
/// PRB, optionally scaled by piecewise-constant channel factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioModel {
    pub total_prb: u32,
    /// Default yield for slices without an override.
    pub bytes_per_prb_per_tti: u32,
    #[serde(default)]
    pub slice_overrides: Vec<SliceRadio>,
    /// Channel factor changes, applied in time order.
    #[serde(default)]
    pub channel: Vec<ChannelStep>,
    #[serde(default = "default_tti_ms")]
    pub tti_ms: u32,
}

fn default_tti_ms() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRadio {
    pub slice_id: SliceId,
    pub bytes_per_prb_per_tti: u32,
}

/// From `t` on, the yield of `slice_id` (or every slice when absent) is
/// multiplied by `factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStep {
    pub t: f64,
    #[serde(default)]
    pub slice_id: Option<SliceId>,
    pub factor: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            total_prb: 100,
            bytes_per_prb_per_tti: 50,
            slice_overrides: Vec::new(),
            channel: Vec::new(),
            tti_ms: 1,
        }
    }
}

impl RadioModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.total_prb == 0 {
            return Err(ConfigError::new(
                "invalid_radio",
                "radio.total_prb",
                "must be positive",
            ));
        }
        if self.bytes_per_prb_per_tti == 0
            || self
                .slice_overrides
                .iter()
                .any(|o| o.bytes_per_prb_per_tti == 0)
        {
            return Err(ConfigError::new(
                "invalid_radio",
                "radio.bytes_per_prb_per_tti",
                "must be positive",
            ));
        }
        if self.tti_ms == 0 || 1000 % self.tti_ms != 0 {
            return Err(ConfigError::new(
                "invalid_radio",
                "radio.tti_ms",
                "must divide one second evenly",
            ));
        }
        for (i, c) in self.channel.iter().enumerate() {
            if !(c.factor.is_finite() && c.factor > 0.0 && c.t >= 0.0) {
                return Err(ConfigError::new(
                    "invalid_radio",
                    format!("radio.channel[{i}]"),
                    "factor must be positive and t non-negative",
                ));
            }
        }
        Ok(())
    }

    pub fn ttis_per_second(&self) -> u64 {
        u64::from(1000 / self.tti_ms)
    }

    pub fn base_bytes_per_prb(&self, slice_id: SliceId) -> u32 {
        self.slice_overrides
            .iter()
            .find(|o| o.slice_id == slice_id)
            .map_or(self.bytes_per_prb_per_tti, |o| o.bytes_per_prb_per_tti)
    }

    /// Nominal bytes one unit of cap delivers per second (no channel factor).
    pub fn bytes_per_prb_per_second(&self, slice_id: SliceId) -> f64 {
        f64::from(self.base_bytes_per_prb(slice_id)) * self.ttis_per_second() as f64
    }
}
