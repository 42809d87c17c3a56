//! RRC.ConnMean: mean number of RRC-connected UEs per cell and granularity period.
//!
//! The connected set is sampled every `sampling` on a grid anchored at t=0.
//! A period `[end - granularity, end)` reports the round-half-up mean of
//! the samples taken inside it.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ids::{CellId, UeId};
use crate::time::SimTime;

pub const MEAS_NAME: &str = "RRC.ConnMean";
pub const REPORT_STYLE: u8 = 1;
pub const REPORT_FORMAT: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KpmError {
    #[error("inconsistent {kind:?} for UE {ue} at t={t}")]
    InconsistentTransition { ue: UeId, kind: TransitionKind, t: SimTime },
    #[error("granularity period ending at t={end} has no samples")]
    EmptyPeriod { end: SimTime },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Attach,
    Detach,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KpmParams {
    pub granularity: SimTime,
    pub sampling: SimTime,
}

impl Default for KpmParams {
    fn default() -> Self {
        KpmParams {
            granularity: SimTime::from_nanos(10_000_000_000),
            sampling: SimTime::from_nanos(1_000_000_000),
        }
    }
}

impl KpmParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.sampling == SimTime::ZERO || self.granularity == SimTime::ZERO {
            return Err("kpm granularity and sampling must be > 0".into());
        }
        if !self.granularity.is_multiple_of(self.sampling) {
            return Err("kpm granularity_s must be an integer multiple of sampling_s".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KpmReport {
    pub period_end: SimTime,
    pub cell_id: CellId,
    pub meas_name: &'static str,
    pub value: u64,
}

/// Round-half-up of `sum / n` for non-negative integers.
pub fn round_half_up_mean(sum: u64, n: u64) -> u64 {
    assert!(n > 0, "mean of zero samples");
    (2 * sum + n) / (2 * n)
}

#[derive(Clone, Debug)]
pub struct KpmCollector {
    cell_id: CellId,
    connected: BTreeSet<UeId>,
    last_transition: SimTime,
    samples: Vec<(SimTime, u64)>,
    attaches: u64,
    detaches: u64,
}

impl KpmCollector {
    pub fn new(cell_id: CellId) -> Self {
        KpmCollector {
            cell_id,
            connected: BTreeSet::new(),
            last_transition: SimTime::ZERO,
            samples: Vec::new(),
            attaches: 0,
            detaches: 0,
        }
    }

    pub fn cell_id(&self) -> &CellId {
        &self.cell_id
    }

    /// Applies a transition at `t`. Transitions must arrive in time order.
    pub fn record_transition(&mut self, t: SimTime, ue: &UeId, kind: TransitionKind) -> Result<(), KpmError> {
        let err = || KpmError::InconsistentTransition {
            ue: ue.clone(),
            kind,
            t,
        };
        if t < self.last_transition {
            return Err(err());
        }
        let ok = match kind {
            TransitionKind::Attach => self.connected.insert(ue.clone()),
            TransitionKind::Detach => self.connected.remove(ue),
        };
        if !ok {
            return Err(err());
        }
        match kind {
            TransitionKind::Attach => self.attaches += 1,
            TransitionKind::Detach => self.detaches += 1,
        }
        self.last_transition = t;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.connected.len() as u64
    }

    pub fn attaches(&self) -> u64 {
        self.attaches
    }

    pub fn detaches(&self) -> u64 {
        self.detaches
    }

    /// Records and returns the current count. Transitions at `t` must already be applied.
    pub fn sample(&mut self, t: SimTime) -> u64 {
        let c = self.count();
        self.samples.push((t, c));
        c
    }

    /// Reports the period `[end - granularity, end)` and drops its samples.
    pub fn close_period(&mut self, end: SimTime, granularity: SimTime) -> Result<KpmReport, KpmError> {
        let start = end.saturating_sub(granularity);
        let (inside, rest): (Vec<_>, Vec<_>) = self.samples.drain(..).partition(|(t, _)| *t >= start && *t < end);
        self.samples = rest.into_iter().filter(|(t, _)| *t >= end).collect();
        if inside.is_empty() {
            return Err(KpmError::EmptyPeriod { end });
        }
        let sum: u64 = inside.iter().map(|(_, c)| c).sum();
        Ok(KpmReport {
            period_end: end,
            cell_id: self.cell_id.clone(),
            meas_name: MEAS_NAME,
            value: round_half_up_mean(sum, inside.len() as u64),
        })
    }
}
