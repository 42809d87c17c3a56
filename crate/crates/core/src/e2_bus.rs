//! In-process indication/control bus with deterministic delivery.
//!
//! Each subscription owns a queue keyed by `(delivery time, publisher, seq)`,
//! so draining it yields the canonical order regardless of publish
//! interleaving. `seq` is a bus-wide publish counter, which also makes
//! per-publisher order FIFO.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::handover::HoOutcome;
use crate::ids::{CellId, CellPair, UeId};
use crate::time::SimTime;

pub const INDICATION_STYLE: u8 = 3;
pub const INDICATION_ID: u8 = 2;
pub const CONTROL_STYLE: u8 = 3;
pub const CONTROL_ACTION_ID: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("bus is closed")]
    BusClosed,
    #[error("unknown subscription {0}")]
    UnknownSubscription(usize),
}

/// Completed handover attempt reported by the gNB.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HandoverEvent {
    pub style: u8,
    pub indication_id: u8,
    pub t: SimTime,
    pub ue_id: UeId,
    pub source_cell: CellId,
    pub target_cell: CellId,
    pub outcome: HoOutcome,
}

impl HandoverEvent {
    pub fn new(t: SimTime, ue_id: UeId, source_cell: CellId, target_cell: CellId, outcome: HoOutcome) -> Self {
        HandoverEvent {
            style: INDICATION_STYLE,
            indication_id: INDICATION_ID,
            t,
            ue_id,
            source_cell,
            target_cell,
            outcome,
        }
    }
}

/// Absolute A3 offset for one cell pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlDirective {
    pub style: u8,
    pub action_id: u8,
    pub pair: CellPair,
    pub new_offset_db: f64,
    /// Value before clamping to the offset cap.
    pub requested_offset_db: f64,
    pub clamped: bool,
}

impl ControlDirective {
    pub fn new(pair: CellPair, requested_offset_db: f64, cap_db: f64) -> Self {
        let applied = crate::meas_events::clamp_offset(requested_offset_db, cap_db);
        ControlDirective {
            style: CONTROL_STYLE,
            action_id: CONTROL_ACTION_ID,
            pair,
            new_offset_db: applied.value_db,
            requested_offset_db,
            clamped: applied.clamped,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Indication,
    Control,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum E2Message {
    Indication(HandoverEvent),
    Control(ControlDirective),
}

impl E2Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            E2Message::Indication(_) => MessageKind::Indication,
            E2Message::Control(_) => MessageKind::Control,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PublisherId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubscriptionId(usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery {
    pub t: SimTime,
    pub publisher: PublisherId,
    pub seq: u64,
    pub msg: E2Message,
}

/// One line of the message log, stamped with the delivery time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRecord {
    pub t_s: SimTime,
    pub kind: MessageKind,
    pub payload: E2Message,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BusParams {
    pub indication_delay: SimTime,
    pub control_delay: SimTime,
}

impl Default for BusParams {
    fn default() -> Self {
        BusParams {
            indication_delay: SimTime::ZERO,
            control_delay: SimTime::ZERO,
        }
    }
}

#[derive(Debug)]
struct Subscriber {
    kind: MessageKind,
    queue: BTreeMap<(SimTime, PublisherId, u64), E2Message>,
}

#[derive(Debug)]
pub struct E2Bus {
    params: BusParams,
    open: bool,
    next_seq: u64,
    subscribers: Vec<Subscriber>,
    log: Vec<LogRecord>,
}

impl E2Bus {
    pub fn new(params: BusParams) -> Self {
        E2Bus {
            params,
            open: true,
            next_seq: 0,
            subscribers: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn close(&mut self) {
        self.open = false;
    }

    pub fn subscribe(&mut self, kind: MessageKind) -> Result<SubscriptionId, BusError> {
        if !self.open {
            return Err(BusError::BusClosed);
        }
        self.subscribers.push(Subscriber {
            kind,
            queue: BTreeMap::new(),
        });
        Ok(SubscriptionId(self.subscribers.len() - 1))
    }

    /// Enqueues `msg` for every current subscriber of its kind.
    pub fn publish(&mut self, publisher: PublisherId, msg: E2Message, t: SimTime) -> Result<(), BusError> {
        if !self.open {
            return Err(BusError::BusClosed);
        }
        let delay = match msg.kind() {
            MessageKind::Indication => self.params.indication_delay,
            MessageKind::Control => self.params.control_delay,
        };
        let key = (t + delay, publisher, self.next_seq);
        self.next_seq += 1;
        for sub in self.subscribers.iter_mut().filter(|s| s.kind == msg.kind()) {
            sub.queue.insert(key, msg.clone());
        }
        self.log.push(LogRecord {
            t_s: key.0,
            kind: msg.kind(),
            payload: msg,
        });
        Ok(())
    }

    /// Removes and returns every message due at or before `now`, in canonical order.
    pub fn deliver(&mut self, sub: SubscriptionId, now: SimTime) -> Result<Vec<Delivery>, BusError> {
        if !self.open {
            return Err(BusError::BusClosed);
        }
        let s = self
            .subscribers
            .get_mut(sub.0)
            .ok_or(BusError::UnknownSubscription(sub.0))?;
        let later = s.queue.split_off(&(now + SimTime::from_nanos(1), PublisherId(0), 0));
        let due = std::mem::replace(&mut s.queue, later);
        Ok(due
            .into_iter()
            .map(|((t, publisher, seq), msg)| Delivery { t, publisher, seq, msg })
            .collect())
    }

    /// Messages still queued for `sub`.
    pub fn pending(&self, sub: SubscriptionId) -> usize {
        self.subscribers.get(sub.0).map_or(0, |s| s.queue.len())
    }

    /// Every published message in publish order.
    pub fn message_log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.log
    }
}
