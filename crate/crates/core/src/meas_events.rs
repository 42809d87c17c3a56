//! A3 / A4 measurement-event detection with time-to-trigger.
//!
//! Entry conditions (strict):
//!
//! * A3: `Mn > Mp + Off + Hys`, with `Off` shared by both directions of a cell pair.
//! * A4: `Mn - Hys > Thr`.
//!
//! An event fires once the entry condition has held on every sample for at
//! least the time-to-trigger, and then not again until the serving cell
//! changes.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ids::{CellId, CellPair, UeId};
use crate::time::SimTime;

/// Magnitude limit for any A3 offset.
pub const OFFSET_CAP_DB: f64 = 24.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasError {
    #[error("no sample for link ({ue}, {cell}) at t={t}")]
    MissingSample { ue: UeId, cell: CellId, t: SimTime },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MeasKind {
    A3,
    A4,
}

impl MeasKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasKind::A3 => "A3",
            MeasKind::A4 => "A4",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasEvent {
    pub kind: MeasKind,
    pub t: SimTime,
    pub ue_id: UeId,
    pub serving_cell: CellId,
    pub neighbor_cell: CellId,
    /// Neighbor RSRP on the sample that fired the event.
    pub neighbor_rsrp_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct A3Params {
    pub initial_offset_db: f64,
    pub hysteresis_db: f64,
    pub ttt: SimTime,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct A4Params {
    pub threshold_dbm: f64,
    pub hysteresis_db: f64,
    pub ttt: SimTime,
}

pub fn a3_entry(mp_dbm: f64, mn_dbm: f64, offset_db: f64, hysteresis_db: f64) -> bool {
    mn_dbm > mp_dbm + offset_db + hysteresis_db
}

pub fn a4_entry(mn_dbm: f64, threshold_dbm: f64, hysteresis_db: f64) -> bool {
    mn_dbm - hysteresis_db > threshold_dbm
}

/// Result of writing an offset into an [`OffsetTable`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppliedOffset {
    pub value_db: f64,
    pub clamped: bool,
}

/// Clamps to `[-cap, cap]`, flagging when the input was outside.
pub fn clamp_offset(value_db: f64, cap_db: f64) -> AppliedOffset {
    let v = value_db.clamp(-cap_db, cap_db);
    AppliedOffset {
        value_db: v,
        clamped: v != value_db,
    }
}

/// Current A3 offset for every cell pair. Pairs never written hold the initial offset.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetTable {
    initial_db: f64,
    cap_db: f64,
    entries: BTreeMap<CellPair, f64>,
}

impl OffsetTable {
    pub fn new(initial_db: f64, cap_db: f64) -> Self {
        OffsetTable {
            initial_db: clamp_offset(initial_db, cap_db).value_db,
            cap_db,
            entries: BTreeMap::new(),
        }
    }

    pub fn cap_db(&self) -> f64 {
        self.cap_db
    }

    pub fn get(&self, pair: &CellPair) -> f64 {
        self.entries.get(pair).copied().unwrap_or(self.initial_db)
    }

    pub fn set(&mut self, pair: CellPair, value_db: f64) -> AppliedOffset {
        let applied = clamp_offset(value_db, self.cap_db);
        self.entries.insert(pair, applied.value_db);
        applied
    }

    /// Explicitly written pairs in pair order.
    pub fn entries(&self) -> impl Iterator<Item = (&CellPair, f64)> {
        self.entries.iter().map(|(p, v)| (p, *v))
    }
}

/// TTT bookkeeping shared by both event kinds.
#[derive(Clone, Debug, Default, PartialEq)]
struct Trigger {
    entered_since: Option<SimTime>,
    fired: bool,
}

impl Trigger {
    /// Feeds one sample's entry result; true when the event fires now.
    fn feed(&mut self, t: SimTime, entered: bool, ttt: SimTime) -> bool {
        if self.fired {
            return false;
        }
        if !entered {
            self.entered_since = None;
            return false;
        }
        let since = *self.entered_since.get_or_insert(t);
        if t.saturating_sub(since) >= ttt {
            self.fired = true;
            return true;
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct A3PairState {
    pub pair: CellPair,
    pub hysteresis_db: f64,
    pub ttt: SimTime,
    pub entered_since: Option<SimTime>,
    pub fired: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct A4State {
    pub ue_id: UeId,
    pub neighbor_cell: CellId,
    pub threshold_dbm: f64,
    pub hysteresis_db: f64,
    pub ttt: SimTime,
    pub entered_since: Option<SimTime>,
    pub fired: bool,
}

/// Detector for one UE within one serving epoch.
#[derive(Clone, Debug)]
pub struct UeDetector {
    ue_id: UeId,
    serving: CellId,
    a3: A3Params,
    a4: Option<A4Params>,
    a3_triggers: BTreeMap<CellId, Trigger>,
    a4_triggers: BTreeMap<CellId, Trigger>,
}

impl UeDetector {
    /// Starts a fresh serving epoch on `serving`, tracking every other cell in `cells`.
    /// A4 is evaluated only when `a4` is given.
    pub fn new(ue_id: UeId, serving: CellId, cells: &[CellId], a3: A3Params, a4: Option<A4Params>) -> Self {
        let neighbors = || cells.iter().filter(|c| **c != serving);
        let a3_triggers = neighbors().map(|c| (c.clone(), Trigger::default())).collect();
        let a4_triggers = if a4.is_some() {
            neighbors().map(|c| (c.clone(), Trigger::default())).collect()
        } else {
            BTreeMap::new()
        };
        UeDetector {
            ue_id,
            serving,
            a3,
            a4,
            a3_triggers,
            a4_triggers,
        }
    }

    pub fn serving(&self) -> &CellId {
        &self.serving
    }

    /// Snapshot of the A3 state toward `neighbor`.
    pub fn a3_state(&self, neighbor: &CellId, offsets: &OffsetTable) -> Option<(A3PairState, f64)> {
        let tr = self.a3_triggers.get(neighbor)?;
        let pair = CellPair::new(self.serving.clone(), neighbor.clone())?;
        let off = offsets.get(&pair);
        Some((
            A3PairState {
                pair,
                hysteresis_db: self.a3.hysteresis_db,
                ttt: self.a3.ttt,
                entered_since: tr.entered_since,
                fired: tr.fired,
            },
            off,
        ))
    }

    pub fn a4_state(&self, neighbor: &CellId) -> Option<A4State> {
        let p = self.a4.as_ref()?;
        let tr = self.a4_triggers.get(neighbor)?;
        Some(A4State {
            ue_id: self.ue_id.clone(),
            neighbor_cell: neighbor.clone(),
            threshold_dbm: p.threshold_dbm,
            hysteresis_db: p.hysteresis_db,
            ttt: p.ttt,
            entered_since: tr.entered_since,
            fired: tr.fired,
        })
    }

    /// Evaluates one measurement instant.
    ///
    /// `a3_gate` limits A3 evaluation to the neighbors it accepts; a gated-out
    /// neighbor has its TTT timer reset. Emitted order: A4 events by cell id,
    /// then A3 events by neighbor RSRP descending, then cell id.
    pub fn step(
        &mut self,
        t: SimTime,
        samples: &BTreeMap<CellId, f64>,
        offsets: &OffsetTable,
        a3_gate: &dyn Fn(&CellId) -> bool,
    ) -> Result<Vec<MeasEvent>, MeasError> {
        let lookup = |cell: &CellId| {
            samples.get(cell).copied().ok_or_else(|| MeasError::MissingSample {
                ue: self.ue_id.clone(),
                cell: cell.clone(),
                t,
            })
        };
        let mp = lookup(&self.serving)?;
        for cell in self.a3_triggers.keys() {
            lookup(cell)?;
        }

        let mut out = Vec::new();
        if let Some(p) = &self.a4 {
            for (cell, tr) in self.a4_triggers.iter_mut() {
                let mn = samples[cell];
                if tr.feed(t, a4_entry(mn, p.threshold_dbm, p.hysteresis_db), p.ttt) {
                    out.push(event(&self.ue_id, &self.serving, MeasKind::A4, t, cell, mn));
                }
            }
        }

        let mut a3_fired = Vec::new();
        for (cell, tr) in self.a3_triggers.iter_mut() {
            if !a3_gate(cell) {
                tr.entered_since = None;
                continue;
            }
            let mn = samples[cell];
            let pair = CellPair::new(self.serving.clone(), cell.clone()).expect("neighbor differs from serving");
            if tr.feed(t, a3_entry(mp, mn, offsets.get(&pair), self.a3.hysteresis_db), self.a3.ttt) {
                a3_fired.push((cell.clone(), mn));
            }
        }
        a3_fired.sort_by(|(ca, ma), (cb, mb)| mb.total_cmp(ma).then_with(|| ca.cmp(cb)));
        for (cell, mn) in a3_fired {
            out.push(event(&self.ue_id, &self.serving, MeasKind::A3, t, &cell, mn));
        }
        Ok(out)
    }

}

fn event(ue_id: &UeId, serving: &CellId, kind: MeasKind, t: SimTime, neighbor: &CellId, mn: f64) -> MeasEvent {
    MeasEvent {
        kind,
        t,
        ue_id: ue_id.clone(),
        serving_cell: serving.clone(),
        neighbor_cell: neighbor.clone(),
        neighbor_rsrp_dbm: mn,
    }
}
