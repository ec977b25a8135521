use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{KpmRecord, SliceId};

/// Number of 1 s records kept per slice.
pub const WINDOW_SLOTS: usize = 5;
/// Span of the sliding window in seconds.
pub const WINDOW_SPAN_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("record for slice {slice_id} at t={t} is not newer than t={newest}")]
    OutOfOrder {
        slice_id: SliceId,
        t: f64,
        newest: f64,
    },
    #[error("record for unknown slice {0}")]
    UnknownSlice(SliceId),
}

/// Per-slice ring of the latest KPM records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpmWindow {
    slice_ids: Vec<SliceId>,
    rings: Vec<VecDeque<KpmRecord>>,
}

/// Aggregates recomputed on every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceAggregate {
    pub slice_id: SliceId,
    pub samples: usize,
    /// Mbit/s.
    pub mean_throughput: f64,
    /// ms.
    pub mean_delay: f64,
    pub latest_backlog: u64,
    pub earliest_backlog: u64,
    /// Seconds between the oldest and newest record.
    pub span_s: f64,
    /// Σ used / Σ allocated over the window (1.0 when nothing was allocated).
    pub efficiency: f64,
}

impl KpmWindow {
    pub fn new(slice_ids: &[SliceId]) -> Self {
        Self {
            slice_ids: slice_ids.to_vec(),
            rings: vec![VecDeque::with_capacity(WINDOW_SLOTS + 1); slice_ids.len()],
        }
    }

    pub fn slice_ids(&self) -> &[SliceId] {
        &self.slice_ids
    }

    pub fn records(&self, idx: usize) -> impl Iterator<Item = &KpmRecord> {
        self.rings[idx].iter()
    }

    pub fn newest_t(&self) -> Option<f64> {
        self.rings
            .iter()
            .filter_map(|r| r.back().map(|k| k.t))
            .max_by(f64::total_cmp)
    }

    /// Fraction of the `slices × WINDOW_SLOTS` slots holding a record.
    pub fn fill_fraction(&self) -> f64 {
        if self.rings.is_empty() {
            return 0.0;
        }
        let filled: usize = self.rings.iter().map(VecDeque::len).sum();
        filled as f64 / (self.rings.len() * WINDOW_SLOTS) as f64
    }

    pub fn is_empty(&self) -> bool {
        self.rings.iter().all(VecDeque::is_empty)
    }

    /// Appends a batch; the batch is rejected as a whole if any record is
    /// stale or names an unknown slice.
    pub fn update(&mut self, batch: &[KpmRecord]) -> Result<(), WindowError> {
        let mut idxs = Vec::with_capacity(batch.len());
        for r in batch {
            let idx = self
                .slice_ids
                .iter()
                .position(|&id| id == r.slice_id)
                .ok_or(WindowError::UnknownSlice(r.slice_id))?;
            if let Some(newest) = self.rings[idx].back().map(|k| k.t) {
                if r.t <= newest {
                    return Err(WindowError::OutOfOrder {
                        slice_id: r.slice_id,
                        t: r.t,
                        newest,
                    });
                }
            }
            idxs.push(idx);
        }
        for (r, idx) in batch.iter().zip(idxs) {
            let ring = &mut self.rings[idx];
            ring.push_back(r.clone());
            while ring.len() > WINDOW_SLOTS
                || ring.front().is_some_and(|k| k.t < r.t - WINDOW_SPAN_S)
            {
                ring.pop_front();
            }
        }
        Ok(())
    }

    pub fn aggregate(&self, idx: usize) -> Option<SliceAggregate> {
        let ring = &self.rings[idx];
        let (first, last) = (ring.front()?, ring.back()?);
        let n = ring.len() as f64;
        let used: u64 = ring.iter().map(|k| k.prb_used).sum();
        let alloc: u64 = ring.iter().map(|k| k.prb_allocated).sum();
        Some(SliceAggregate {
            slice_id: self.slice_ids[idx],
            samples: ring.len(),
            mean_throughput: ring.iter().map(|k| k.dl_throughput).sum::<f64>() / n,
            mean_delay: ring.iter().map(|k| k.rlc_delay).sum::<f64>() / n,
            latest_backlog: last.buffer_occupancy,
            earliest_backlog: first.buffer_occupancy,
            span_s: last.t - first.t,
            efficiency: if alloc == 0 {
                1.0
            } else {
                used as f64 / alloc as f64
            },
        })
    }

    pub fn aggregates(&self) -> Vec<Option<SliceAggregate>> {
        (0..self.rings.len()).map(|i| self.aggregate(i)).collect()
    }
}

/// Functional form of [`KpmWindow::update`].
pub fn update_window(window: &KpmWindow, batch: &[KpmRecord]) -> Result<KpmWindow, WindowError> {
    let mut next = window.clone();
    next.update(batch)?;
    Ok(next)
}
