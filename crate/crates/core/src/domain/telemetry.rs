use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SliceId;

/// One per-slice KPM sample, emitted once per simulated second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpmRecord {
    pub t: f64,
    pub slice_id: SliceId,
    /// Mbit/s over the sample interval.
    pub dl_throughput: f64,
    /// Backlog in bytes at sample time.
    pub buffer_occupancy: u64,
    /// Milliseconds.
    pub rlc_delay: f64,
    /// PRB-TTIs carrying data during the interval.
    pub prb_used: u64,
    /// PRB-TTIs available to the slice during the interval.
    pub prb_allocated: u64,
}

impl KpmRecord {
    pub fn efficiency(&self) -> f64 {
        resource_efficiency(self.prb_used, self.prb_allocated).unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TelemetryError {
    #[error("malformed telemetry: {used} PRBs used exceeds {allocated} allocated")]
    UsedExceedsAllocated { used: u64, allocated: u64 },
}

/// Fraction of allocated PRBs that carried data. An idle slice (nothing
/// allocated) counts as fully efficient.
pub fn resource_efficiency(prb_used: u64, prb_allocated: u64) -> Result<f64, TelemetryError> {
    if prb_used > prb_allocated {
        return Err(TelemetryError::UsedExceedsAllocated {
            used: prb_used,
            allocated: prb_allocated,
        });
    }
    if prb_allocated == 0 {
        return Ok(1.0);
    }
    Ok(prb_used as f64 / prb_allocated as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn efficiency_examples() {
        assert_eq!(resource_efficiency(40, 50).unwrap(), 0.8);
        assert_eq!(resource_efficiency(0, 0).unwrap(), 1.0);
        assert_eq!(resource_efficiency(25, 25).unwrap(), 1.0);
        assert!(resource_efficiency(26, 25).is_err());
    }

    proptest! {
        #[test]
        fn efficiency_in_unit_interval(alloc in 0u64..1_000_000, frac in 0.0f64..=1.0) {
            let used = (alloc as f64 * frac).floor() as u64;
            let e = resource_efficiency(used, alloc).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
