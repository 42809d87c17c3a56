//! Anti-ping-pong xApp.
//!
//! Keeps the recent successful handovers of each UE in a ring buffer. When a
//! handover `B -> A` follows `A -> B` within the detection window, the xApp
//! raises the A3 offset of the pair `{A, B}` by one step and publishes the
//! new absolute value. A handover that closes a detected pair is not reused
//! as the opening half of the next one.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::e2_bus::{ControlDirective, HandoverEvent};
use crate::handover::HoOutcome;
use crate::ids::{CellId, CellPair, UeId};
use crate::meas_events::{OffsetTable, OFFSET_CAP_DB};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XappConfig {
    pub t_pp: SimTime,
    pub step_db: f64,
    pub ring_capacity: usize,
    pub offset_cap_db: f64,
}

impl Default for XappConfig {
    fn default() -> Self {
        XappConfig {
            t_pp: SimTime::from_nanos(10_000_000_000),
            step_db: 1.0,
            ring_capacity: 8,
            offset_cap_db: OFFSET_CAP_DB,
        }
    }
}

impl XappConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.step_db.is_finite() && self.step_db > 0.0) {
            return Err("step_dB must be > 0".into());
        }
        if self.ring_capacity < 2 {
            return Err("ring_capacity must be >= 2".into());
        }
        if !(self.offset_cap_db.is_finite() && self.offset_cap_db > 0.0) {
            return Err("offset_cap_dB must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoRecord {
    pub t: SimTime,
    pub source: CellId,
    pub target: CellId,
    /// Already used to close a detected ping-pong.
    pub consumed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UeHoHistory {
    pub ue_id: UeId,
    pub ring: VecDeque<HoRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffsetTraceEntry {
    pub t: SimTime,
    pub pair: CellPair,
    pub offset_db: f64,
}

#[derive(Clone, Debug)]
pub struct PingPongXapp {
    cfg: XappConfig,
    histories: BTreeMap<UeId, UeHoHistory>,
    trace: Vec<OffsetTraceEntry>,
    detections: u64,
}

impl PingPongXapp {
    pub fn new(cfg: XappConfig) -> Self {
        PingPongXapp {
            cfg,
            histories: BTreeMap::new(),
            trace: Vec::new(),
            detections: 0,
        }
    }

    pub fn config(&self) -> &XappConfig {
        &self.cfg
    }

    pub fn history(&self, ue: &UeId) -> Option<&UeHoHistory> {
        self.histories.get(ue)
    }

    pub fn detections(&self) -> u64 {
        self.detections
    }

    /// Handles one delivered indication. `offsets` is the offset state as last
    /// published to the xApp.
    pub fn on_indication(&mut self, ev: &HandoverEvent, offsets: &OffsetTable) -> Option<ControlDirective> {
        if ev.outcome != HoOutcome::Success {
            return None;
        }
        let cap = self.cfg.ring_capacity;
        let hist = self.histories.entry(ev.ue_id.clone()).or_insert_with(|| UeHoHistory {
            ue_id: ev.ue_id.clone(),
            ring: VecDeque::with_capacity(cap),
        });
        let detected = hist.ring.back().is_some_and(|prev| {
            !prev.consumed
                && prev.source == ev.target_cell
                && prev.target == ev.source_cell
                && ev.t.saturating_sub(prev.t) <= self.cfg.t_pp
                && ev.t >= prev.t
        });
        if hist.ring.len() == cap {
            hist.ring.pop_front();
        }
        hist.ring.push_back(HoRecord {
            t: ev.t,
            source: ev.source_cell.clone(),
            target: ev.target_cell.clone(),
            consumed: detected,
        });
        if !detected {
            return None;
        }
        let pair = CellPair::new(ev.source_cell.clone(), ev.target_cell.clone())?;
        self.detections += 1;
        let directive = ControlDirective::new(
            pair.clone(),
            offsets.get(&pair) + self.cfg.step_db,
            self.cfg.offset_cap_db,
        );
        self.trace.push(OffsetTraceEntry {
            t: ev.t,
            pair,
            offset_db: directive.new_offset_db,
        });
        Some(directive)
    }

    /// Every directive emitted so far, in emission order.
    pub fn offset_trace(&self) -> &[OffsetTraceEntry] {
        &self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(s: f64) -> SimTime {
        SimTime::from_secs_f64(s).unwrap()
    }

    fn ho(t: f64, from: &str, to: &str) -> HandoverEvent {
        HandoverEvent::new(secs(t), "u".into(), from.into(), to.into(), HoOutcome::Success)
    }

    fn feed(x: &mut PingPongXapp, offsets: &mut OffsetTable, evs: &[HandoverEvent]) -> Vec<ControlDirective> {
        let mut out = Vec::new();
        for e in evs {
            if let Some(d) = x.on_indication(e, offsets) {
                offsets.set(d.pair.clone(), d.new_offset_db);
                out.push(d);
            }
        }
        out
    }

    #[test]
    fn aba_within_window_steps_offset() {
        let mut x = PingPongXapp::new(XappConfig::default());
        let mut o = OffsetTable::new(5.0, 24.0);
        let d = feed(&mut x, &mut o, &[ho(2.0, "A", "B"), ho(5.5, "B", "A")]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].new_offset_db, 6.0);
        assert_eq!(d[0].pair, CellPair::new("A".into(), "B".into()).unwrap());
    }

    #[test]
    fn single_handover_no_directive() {
        let mut x = PingPongXapp::new(XappConfig::default());
        let mut o = OffsetTable::new(5.0, 24.0);
        assert!(feed(&mut x, &mut o, &[ho(2.0, "A", "B")]).is_empty());
        assert!(x.offset_trace().is_empty());
    }

    #[test]
    fn window_is_inclusive() {
        for (dt, expect) in [(9.9, 1), (10.0, 1), (10.1, 0)] {
            let mut x = PingPongXapp::new(XappConfig::default());
            let mut o = OffsetTable::new(5.0, 24.0);
            let d = feed(&mut x, &mut o, &[ho(0.0, "A", "B"), ho(dt, "B", "A")]);
            assert_eq!(d.len(), expect, "dt={dt}");
        }
    }

    #[test]
    fn zero_window_admits_nothing() {
        let mut x = PingPongXapp::new(XappConfig {
            t_pp: SimTime::ZERO,
            ..Default::default()
        });
        let mut o = OffsetTable::new(5.0, 24.0);
        let evs: Vec<_> = (0..10)
            .map(|k| if k % 2 == 0 { ho(k as f64, "A", "B") } else { ho(k as f64, "B", "A") })
            .collect();
        assert!(feed(&mut x, &mut o, &evs).is_empty());
    }

    #[test]
    fn needs_strict_alternation() {
        let mut x = PingPongXapp::new(XappConfig::default());
        let mut o = OffsetTable::new(5.0, 24.0);
        assert!(feed(&mut x, &mut o, &[ho(0.0, "A", "B"), ho(1.0, "B", "C")]).is_empty());
    }

    #[test]
    fn failures_are_ignored() {
        let mut x = PingPongXapp::new(XappConfig::default());
        let mut o = OffsetTable::new(5.0, 24.0);
        let mut fail = ho(1.0, "B", "A");
        fail.outcome = HoOutcome::FailRlf;
        assert!(feed(&mut x, &mut o, &[ho(0.0, "A", "B"), fail]).is_empty());
    }

    #[test]
    fn pairs_are_disjoint() {
        let mut x = PingPongXapp::new(XappConfig::default());
        let mut o = OffsetTable::new(5.0, 24.0);
        let evs = [ho(0.0, "A", "B"), ho(1.0, "B", "A"), ho(2.0, "A", "B"), ho(3.0, "B", "A")];
        let d = feed(&mut x, &mut o, &evs);
        assert_eq!(d.iter().map(|d| d.new_offset_db).collect::<Vec<_>>(), vec![6.0, 7.0]);
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut x = PingPongXapp::new(XappConfig {
            ring_capacity: 2,
            ..Default::default()
        });
        let mut o = OffsetTable::new(5.0, 24.0);
        feed(&mut x, &mut o, &[ho(0.0, "A", "B"), ho(20.0, "B", "C"), ho(40.0, "C", "D")]);
        let h = x.history(&"u".into()).unwrap();
        assert_eq!(h.ring.len(), 2);
        assert_eq!(h.ring[0].t, secs(20.0));
    }

    #[test]
    fn clamped_at_cap() {
        let mut x = PingPongXapp::new(XappConfig::default());
        let mut o = OffsetTable::new(23.5, 24.0);
        let d = feed(&mut x, &mut o, &[ho(0.0, "A", "B"), ho(1.0, "B", "A")]);
        assert_eq!(d[0].new_offset_db, 24.0);
        assert!(d[0].clamped);
        assert_eq!(d[0].requested_offset_db, 24.5);
    }
}
