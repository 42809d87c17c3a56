//! Traditional and conditional handover state machines.
//!
//! Traditional: an A3 report starts preparation and reconfiguration, which
//! completes `d_prep + d_exec_trad` later. CHO: an A4 report arms the
//! neighbor in advance; an A3 report on an armed neighbor executes after
//! `d_exec_cho`. In both modes the attempt fails with RLF on the first tick
//! the serving link is below `q_out` while the attempt is in flight, and
//! with a RACH failure when the target is below `q_rach` at execution.
//! After either failure the UE re-attaches to the strongest cell
//! `t_reattach` later.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::e2_bus::HandoverEvent;
use crate::ids::{CellId, UeId};
use crate::meas_events::{MeasEvent, MeasKind};
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HoError {
    #[error("measurement event for UE {got} routed to context of UE {expected}")]
    UnknownUe { expected: UeId, got: UeId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HoMode {
    Traditional,
    Cho,
}

impl HoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HoMode::Traditional => "traditional",
            HoMode::Cho => "cho",
        }
    }

    pub fn parse(s: &str) -> Option<HoMode> {
        match s {
            "traditional" => Some(HoMode::Traditional),
            "cho" => Some(HoMode::Cho),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum HoOutcome {
    Success,
    FailRlf,
    FailRach,
}

impl HoOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            HoOutcome::Success => "Success",
            HoOutcome::FailRlf => "FailRlf",
            HoOutcome::FailRach => "FailRach",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoParams {
    pub mode: HoMode,
    pub d_prep: SimTime,
    pub d_exec_trad: SimTime,
    pub d_exec_cho: SimTime,
    pub q_out_dbm: f64,
    pub q_rach_dbm: f64,
    pub t_reattach: SimTime,
    /// Armed CHO candidates kept per UE; the oldest is dropped first.
    pub max_armed: usize,
}

impl HoParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.d_exec_cho > self.d_exec_trad {
            return Err("d_exec_cho_s must not exceed d_exec_trad_s".into());
        }
        if !self.q_out_dbm.is_finite() || !self.q_rach_dbm.is_finite() {
            return Err("q_out_dBm and q_rach_dBm must be finite".into());
        }
        if self.max_armed == 0 {
            return Err("max_armed must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    /// Not attached (before first attach or after detach).
    Idle,
    Connected,
    TradHoInFlight,
    ChoArmed,
    Executing,
    Rlf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmedCandidate {
    pub cell: CellId,
    pub t_armed: SimTime,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PendingHo {
    pub target: CellId,
    pub t_trigger: SimTime,
    pub t_due: SimTime,
    pub t_armed: Option<SimTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoAttempt {
    pub ue_id: UeId,
    pub source: CellId,
    pub target: CellId,
    pub mode: HoMode,
    /// A4 arming time of the target (CHO only).
    pub t_armed: Option<SimTime>,
    pub t_trigger: SimTime,
    pub t_execute: SimTime,
    pub outcome: HoOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ServingChange {
    Switched { from: CellId, to: CellId },
    Lost { from: CellId },
    Reattached { to: CellId },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdvanceResult {
    pub attempt: Option<HoAttempt>,
    pub indication: Option<HandoverEvent>,
    pub serving_change: Option<ServingChange>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UeContext {
    pub ue_id: UeId,
    pub serving_cell: Option<CellId>,
    pub phase: Phase,
    pub armed: Vec<ArmedCandidate>,
    pub pending: Option<PendingHo>,
    pub reattach_at: Option<SimTime>,
}

impl UeContext {
    pub fn new(ue_id: UeId) -> Self {
        UeContext {
            ue_id,
            serving_cell: None,
            phase: Phase::Idle,
            armed: Vec::new(),
            pending: None,
            reattach_at: None,
        }
    }

    pub fn attach(&mut self, cell: CellId) {
        self.serving_cell = Some(cell);
        self.phase = Phase::Connected;
        self.armed.clear();
        self.pending = None;
        self.reattach_at = None;
    }

    /// Leaves the network; returns the cell that was serving, if any.
    pub fn detach(&mut self) -> Option<CellId> {
        self.phase = Phase::Idle;
        self.armed.clear();
        self.pending = None;
        self.reattach_at = None;
        self.serving_cell.take()
    }

    /// True while measurement events are acted on.
    pub fn accepts_events(&self) -> bool {
        matches!(self.phase, Phase::Connected | Phase::ChoArmed)
    }

    pub fn is_armed(&self, cell: &CellId) -> bool {
        self.armed.iter().any(|a| &a.cell == cell)
    }

    pub fn on_meas_event(&mut self, ev: &MeasEvent, t: SimTime, params: &HoParams) -> Result<(), HoError> {
        if ev.ue_id != self.ue_id {
            return Err(HoError::UnknownUe {
                expected: self.ue_id.clone(),
                got: ev.ue_id.clone(),
            });
        }
        if !self.accepts_events() || self.serving_cell.as_ref() != Some(&ev.serving_cell) {
            return Ok(());
        }
        match (params.mode, ev.kind) {
            (HoMode::Traditional, MeasKind::A3) => {
                self.pending = Some(PendingHo {
                    target: ev.neighbor_cell.clone(),
                    t_trigger: t,
                    t_due: t + params.d_prep + params.d_exec_trad,
                    t_armed: None,
                });
                self.phase = Phase::TradHoInFlight;
            }
            (HoMode::Traditional, MeasKind::A4) => {}
            (HoMode::Cho, MeasKind::A4) => {
                self.armed.retain(|a| a.cell != ev.neighbor_cell);
                self.armed.push(ArmedCandidate {
                    cell: ev.neighbor_cell.clone(),
                    t_armed: t,
                });
                while self.armed.len() > params.max_armed {
                    self.armed.remove(0);
                }
                self.phase = Phase::ChoArmed;
            }
            (HoMode::Cho, MeasKind::A3) => {
                if let Some(a) = self.armed.iter().find(|a| a.cell == ev.neighbor_cell) {
                    self.pending = Some(PendingHo {
                        target: a.cell.clone(),
                        t_trigger: t,
                        t_due: t + params.d_exec_cho,
                        t_armed: Some(a.t_armed),
                    });
                    self.phase = Phase::Executing;
                }
            }
        }
        Ok(())
    }

    /// Runs one tick. `rsrp` holds this UE's latest sample per cell.
    pub fn advance(&mut self, t: SimTime, rsrp: &BTreeMap<CellId, f64>, params: &HoParams) -> AdvanceResult {
        match self.phase {
            Phase::TradHoInFlight | Phase::Executing => self.advance_in_flight(t, rsrp, params),
            Phase::Rlf if self.reattach_at.is_some_and(|at| t >= at) => {
                match strongest(rsrp) {
                    Some(cell) => {
                        self.attach(cell.clone());
                        AdvanceResult {
                            serving_change: Some(ServingChange::Reattached { to: cell }),
                            ..Default::default()
                        }
                    }
                    None => AdvanceResult::default(),
                }
            }
            _ => AdvanceResult::default(),
        }
    }

    fn advance_in_flight(&mut self, t: SimTime, rsrp: &BTreeMap<CellId, f64>, params: &HoParams) -> AdvanceResult {
        let (Some(source), Some(p)) = (self.serving_cell.clone(), self.pending.clone()) else {
            return AdvanceResult::default();
        };
        let serving = rsrp.get(&source).copied().unwrap_or(f64::NEG_INFINITY);
        let outcome = if serving < params.q_out_dbm {
            HoOutcome::FailRlf
        } else if t >= p.t_due {
            let target = rsrp.get(&p.target).copied().unwrap_or(f64::NEG_INFINITY);
            if target < params.q_rach_dbm {
                HoOutcome::FailRach
            } else {
                HoOutcome::Success
            }
        } else {
            return AdvanceResult::default();
        };
        let attempt = HoAttempt {
            ue_id: self.ue_id.clone(),
            source: source.clone(),
            target: p.target.clone(),
            mode: params.mode,
            t_armed: p.t_armed,
            t_trigger: p.t_trigger,
            t_execute: t,
            outcome,
        };
        let indication = HandoverEvent::new(t, self.ue_id.clone(), source.clone(), p.target.clone(), outcome);
        let change = if outcome == HoOutcome::Success {
            self.attach(p.target.clone());
            ServingChange::Switched {
                from: source,
                to: p.target,
            }
        } else {
            self.serving_cell = None;
            self.armed.clear();
            self.pending = None;
            self.phase = Phase::Rlf;
            self.reattach_at = Some(t + params.t_reattach);
            ServingChange::Lost { from: source }
        };
        AdvanceResult {
            attempt: Some(attempt),
            indication: Some(indication),
            serving_change: Some(change),
        }
    }
}

/// Cell with the highest RSRP; ties go to the smaller id.
pub fn strongest(rsrp: &BTreeMap<CellId, f64>) -> Option<CellId> {
    rsrp.iter()
        .fold(None::<(&CellId, f64)>, |best, (c, v)| match best {
            Some((_, bv)) if bv >= *v => best,
            _ => Some((c, *v)),
        })
        .map(|(c, _)| c.clone())
}
