//! Deterministic tick loop.
//!
//! Per tick `t`, in this order:
//!
//! 1. mobility: every UE position at `t`;
//! 2. radio (measurement ticks only): one RSRP sample per link, held until
//!    the next measurement tick;
//! 3. lifecycle: scheduled attaches (to the strongest cell), then detaches;
//! 4. detectors (measurement ticks only): A3/A4 events are dispatched to the
//!    UE's handover context in emission order;
//! 5. handover: in-flight attempts are resolved and failed UEs re-attach;
//!    completed attempts publish a handover indication;
//! 6. xApp: drains due indications and publishes control directives;
//! 7. gNB: drains due directives; each passes the `apply_control` gate and
//!    then updates the offset table, effective from the next detector step;
//! 8. KPM (sampling ticks only): periods ending at `t` are closed, then the
//!    connected count at `t` is sampled.
//!
//! Ticks run from `t = 0` through `t = duration` inclusive.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::e2_bus::{BusError, ControlDirective, E2Bus, E2Message, LogRecord, MessageKind, PublisherId, SubscriptionId};
use crate::handover::{HoAttempt, HoError, HoMode, HoOutcome, ServingChange, UeContext};
use crate::hooks::{AuditRecord, HookEventKind, HookEventLine, HookPlane, HookRegistry, Policy};
use crate::ids::{CellId, UeId};
use crate::inventory::{ConfigError, ScenarioConfig, Tier};
use crate::kpm::{KpmCollector, KpmError, KpmReport, TransitionKind};
use crate::meas_events::{MeasError, MeasEvent, OffsetTable, UeDetector};
use crate::radio::{link_stream, rsrp_at, RsrpSample, ShadowProcess};
use crate::time::SimTime;
use crate::xapp::{OffsetTraceEntry, PingPongXapp};

pub const GNB_PUBLISHER: PublisherId = PublisherId(0);
pub const XAPP_PUBLISHER: PublisherId = PublisherId(1);

/// Gate consulted before every control directive is applied.
pub const ACTION_APPLY_CONTROL: &str = "apply_control";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Meas(#[from] MeasError),
    #[error(transparent)]
    Handover(#[from] HoError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Kpm(#[from] KpmError),
    #[error("BlockedByPolicy: action `{action}` blocked by policy `{policy}` at t={t}: {reason}")]
    BlockedByPolicy {
        action: String,
        policy: String,
        reason: String,
        t: SimTime,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Milestone {
    Initializing,
    NgapConnected,
    CellActive,
    PrachReceived,
}

impl Milestone {
    pub const ORDER: [Milestone; 4] = [
        Milestone::Initializing,
        Milestone::NgapConnected,
        Milestone::CellActive,
        Milestone::PrachReceived,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Milestone::Initializing => "Initializing",
            Milestone::NgapConnected => "NgapConnected",
            Milestone::CellActive => "CellActive",
            Milestone::PrachReceived => "PrachReceived",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MilestoneEntry {
    pub t: SimTime,
    pub cell_id: CellId,
    pub milestone: Milestone,
}

/// Bring-up milestones in the order they were reached.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MilestoneLog {
    pub entries: Vec<MilestoneEntry>,
}

impl MilestoneLog {
    pub fn push(&mut self, t: SimTime, cell_id: CellId, milestone: Milestone) {
        self.entries.push(MilestoneEntry { t, cell_id, milestone });
    }

    pub fn for_cell<'a>(&'a self, cell: &'a CellId) -> impl Iterator<Item = &'a MilestoneEntry> + 'a {
        self.entries.iter().filter(move |e| &e.cell_id == cell)
    }

    pub fn has(&self, cell: &CellId, m: Milestone) -> bool {
        self.for_cell(cell).any(|e| e.milestone == m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MilestoneCheck {
    Ok,
    Violation(String),
}

/// Every cell's milestones must be a prefix of the canonical order, each at
/// most once, with non-decreasing timestamps.
pub fn check_milestones(log: &MilestoneLog) -> MilestoneCheck {
    let mut cells: Vec<&CellId> = Vec::new();
    for e in &log.entries {
        if !cells.contains(&&e.cell_id) {
            cells.push(&e.cell_id);
        }
    }
    for cell in cells {
        let mut last_t = SimTime::ZERO;
        for (i, e) in log.for_cell(cell).enumerate() {
            match Milestone::ORDER.get(i) {
                Some(expected) if *expected == e.milestone => {}
                Some(expected) => {
                    return MilestoneCheck::Violation(format!(
                        "cell {cell}: expected {} at position {i}, found {}",
                        expected.as_str(),
                        e.milestone.as_str()
                    ))
                }
                None => {
                    return MilestoneCheck::Violation(format!(
                        "cell {cell}: extra milestone {} after PrachReceived",
                        e.milestone.as_str()
                    ))
                }
            }
            if e.t < last_t {
                return MilestoneCheck::Violation(format!("cell {cell}: {} goes back in time", e.milestone.as_str()));
            }
            last_t = e.t;
        }
    }
    MilestoneCheck::Ok
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalOffset {
    pub cell_a: CellId,
    pub cell_b: CellId,
    #[serde(rename = "offset_dB")]
    pub offset_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub tier: Tier,
    pub seed: u64,
    pub mode: HoMode,
    pub attempts: u64,
    pub successes: u64,
    pub fail_rlf: u64,
    pub fail_rach: u64,
    pub ping_pongs: u64,
    pub directives_applied: u64,
    pub successes_after_last_directive: u64,
    pub final_offsets: Vec<FinalOffset>,
    pub state_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub rsrp_trace: Vec<RsrpSample>,
    pub meas_events: Vec<MeasEvent>,
    pub attempts: Vec<HoAttempt>,
    pub messages: Vec<LogRecord>,
    pub offset_trace: Vec<OffsetTraceEntry>,
    pub kpm_reports: Vec<KpmReport>,
    pub milestones: MilestoneLog,
    pub audit: Vec<AuditRecord>,
    pub hook_events: Vec<HookEventLine>,
    pub summary: RunSummary,
}

/// Registry used by [`run`]: the offset-cap gate on `apply_control` and,
/// unless allowed, a block on every `ota_*` action.
pub fn default_registry(cfg: &ScenarioConfig) -> HookRegistry {
    let mut reg = HookRegistry::new();
    reg.register(
        HookEventKind::PreAction,
        ACTION_APPLY_CONTROL,
        Policy::max_abs("offset_cap", "requested_offset_dB", cfg.hooks.max_abs_offset_db),
    )
    .expect("fresh registry");
    if !cfg.hooks.allow_ota {
        reg.register(
            HookEventKind::PreAction,
            "ota_*",
            Policy::always_block("ota_gate", "over-the-air actions are disabled for this run"),
        )
        .expect("fresh registry");
    }
    reg
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunArtifacts, SimError> {
    run_with_hooks(cfg, default_registry(cfg))
}

pub fn run_with_hooks(cfg: &ScenarioConfig, registry: HookRegistry) -> Result<RunArtifacts, SimError> {
    let mut sim = Simulation::new(cfg.clone(), registry)?;
    while sim.step()? {}
    Ok(sim.finish())
}

struct UeRuntime {
    id: UeId,
    ctx: UeContext,
    detector: Option<UeDetector>,
    shadows: Vec<ShadowProcess>,
    latest: BTreeMap<CellId, f64>,
    position_m: f64,
    attached_once: bool,
}

#[derive(Serialize)]
struct StateView<'a> {
    t: SimTime,
    offsets: Vec<(String, String, f64)>,
    ues: Vec<&'a UeContext>,
    kpm: Vec<(String, u64)>,
    detections: u64,
}

/// A run in progress. [`run`] drives it to completion; tests may step it.
pub struct Simulation {
    cfg: ScenarioConfig,
    cell_ids: Vec<CellId>,
    next_tick: u64,
    ues: Vec<UeRuntime>,
    offsets: OffsetTable,
    bus: E2Bus,
    gnb_controls: SubscriptionId,
    xapp_indications: Option<SubscriptionId>,
    xapp: Option<PingPongXapp>,
    kpm: Vec<KpmCollector>,
    hooks: HookPlane,
    milestones: MilestoneLog,
    rsrp_trace: Vec<RsrpSample>,
    meas_events: Vec<MeasEvent>,
    attempts: Vec<HoAttempt>,
    kpm_reports: Vec<KpmReport>,
    directives_applied: u64,
    last_directive_at: Option<SimTime>,
}

impl Simulation {
    /// Validates the configuration, fires the run-start hook, and brings up every cell at t=0.
    pub fn new(cfg: ScenarioConfig, registry: HookRegistry) -> Result<Self, SimError> {
        cfg.validate()?;
        let cell_ids = cfg.cell_ids();
        let mut bus = E2Bus::new(cfg.bus);
        let gnb_controls = bus.subscribe(MessageKind::Control)?;
        let (xapp, xapp_indications) = match &cfg.xapp {
            Some(x) => (Some(PingPongXapp::new(x.clone())), Some(bus.subscribe(MessageKind::Indication)?)),
            None => (None, None),
        };
        let ues = cfg
            .ues
            .iter()
            .enumerate()
            .map(|(ui, u)| UeRuntime {
                id: u.id.clone(),
                ctx: UeContext::new(u.id.clone()),
                detector: None,
                shadows: (0..cell_ids.len())
                    .map(|ci| {
                        ShadowProcess::new(
                            cfg.radio.shadowing_sigma_db,
                            cfg.radio.decorrelation_m,
                            link_stream(cfg.seed, ui as u32, ci as u32),
                        )
                    })
                    .collect(),
                latest: BTreeMap::new(),
                position_m: u.trajectory.position_at(0.0),
                attached_once: false,
            })
            .collect();
        let offsets = OffsetTable::new(
            cfg.a3.initial_offset_db,
            cfg.xapp.as_ref().map_or(crate::meas_events::OFFSET_CAP_DB, |x| x.offset_cap_db),
        );
        let kpm = cell_ids.iter().map(|c| KpmCollector::new(c.clone())).collect();
        let mut sim = Simulation {
            cfg,
            cell_ids,
            next_tick: 0,
            ues,
            offsets,
            bus,
            gnb_controls,
            xapp_indications,
            xapp,
            kpm,
            hooks: HookPlane::new(registry),
            milestones: MilestoneLog::default(),
            rsrp_trace: Vec::new(),
            meas_events: Vec::new(),
            attempts: Vec::new(),
            kpm_reports: Vec::new(),
            directives_applied: 0,
            last_directive_at: None,
        };
        sim.start()?;
        Ok(sim)
    }

    fn gate(&self, kind: HookEventKind, action: &str, payload: &Value, t: SimTime) -> Result<(), SimError> {
        let d = self.hooks.fire(kind, action, payload, t.as_secs_f64());
        if d.is_block() {
            return Err(SimError::BlockedByPolicy {
                action: action.to_string(),
                policy: d.policy.unwrap_or_default(),
                reason: d.reason.unwrap_or_default(),
                t,
            });
        }
        Ok(())
    }

    fn notify(&self, action: &str, payload: &Value, t: SimTime) {
        self.hooks.fire(HookEventKind::Notification, action, payload, t.as_secs_f64());
    }

    fn start(&mut self) -> Result<(), SimError> {
        let t = SimTime::ZERO;
        self.gate(
            HookEventKind::PromptSubmit,
            "run_start",
            &json!({
                "scenario": self.cfg.name,
                "seed": self.cfg.seed,
                "tier": self.cfg.tier.as_str(),
                "mode": self.cfg.ho.mode.as_str(),
            }),
            t,
        )?;
        let action = format!("{}_cell_bringup", self.cfg.tier.as_str());
        for cell in self.cell_ids.clone() {
            let payload = json!({"cell": cell.as_str(), "tier": self.cfg.tier.as_str()});
            self.gate(HookEventKind::PreAction, &action, &payload, t)?;
            for m in [Milestone::Initializing, Milestone::NgapConnected, Milestone::CellActive] {
                self.record_milestone(t, &cell, m);
            }
            self.hooks.fire(HookEventKind::PostAction, &action, &payload, 0.0);
        }
        Ok(())
    }

    fn record_milestone(&mut self, t: SimTime, cell: &CellId, m: Milestone) {
        self.milestones.push(t, cell.clone(), m);
        self.notify("milestone", &json!({"cell": cell.as_str(), "milestone": m.as_str()}), t);
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn offsets(&self) -> &OffsetTable {
        &self.offsets
    }

    pub fn hooks(&self) -> &HookPlane {
        &self.hooks
    }

    /// Time of the next tick to run.
    pub fn now(&self) -> SimTime {
        SimTime::from_nanos(self.next_tick * self.cfg.tick.as_nanos())
    }

    /// Hash of all state that actions can change: offsets, UE contexts, connected counts.
    pub fn state_digest(&self) -> String {
        let view = StateView {
            t: self.now(),
            offsets: self
                .offsets
                .entries()
                .map(|(p, v)| (p.a.to_string(), p.b.to_string(), v))
                .collect(),
            ues: self.ues.iter().map(|u| &u.ctx).collect(),
            kpm: self.kpm.iter().map(|k| (k.cell_id().to_string(), k.count())).collect(),
            detections: self.xapp.as_ref().map_or(0, |x| x.detections()),
        };
        let bytes = serde_json::to_vec(&view).expect("state view serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Applies one control directive through the `apply_control` gate.
    pub fn apply_control(&mut self, d: &ControlDirective, t: SimTime) -> Result<(), SimError> {
        let payload = json!({
            "cell_a": d.pair.a.as_str(),
            "cell_b": d.pair.b.as_str(),
            "new_offset_dB": d.new_offset_db,
            "requested_offset_dB": d.requested_offset_db,
            "clamped": d.clamped,
        });
        self.gate(HookEventKind::PreAction, ACTION_APPLY_CONTROL, &payload, t)?;
        self.offsets.set(d.pair.clone(), d.new_offset_db);
        self.directives_applied += 1;
        self.last_directive_at = Some(t);
        self.hooks
            .fire(HookEventKind::PostAction, ACTION_APPLY_CONTROL, &payload, t.as_secs_f64());
        Ok(())
    }

    fn kpm_transition(&mut self, t: SimTime, ue: &UeId, cell: &CellId, kind: TransitionKind) -> Result<(), SimError> {
        let i = self.cell_ids.iter().position(|c| c == cell).expect("known cell");
        self.kpm[i].record_transition(t, ue, kind)?;
        Ok(())
    }

    fn on_attached(&mut self, ui: usize, cell: &CellId, t: SimTime) -> Result<(), SimError> {
        let ue_id = self.ues[ui].id.clone();
        self.kpm_transition(t, &ue_id, cell, TransitionKind::Attach)?;
        let a4 = (self.cfg.ho.mode == HoMode::Cho).then(|| self.cfg.a4.clone());
        self.ues[ui].detector = Some(UeDetector::new(
            ue_id.clone(),
            cell.clone(),
            &self.cell_ids,
            self.cfg.a3.clone(),
            a4,
        ));
        self.ues[ui].attached_once = true;
        if !self.milestones.has(cell, Milestone::PrachReceived) {
            self.record_milestone(t, cell, Milestone::PrachReceived);
        }
        Ok(())
    }

    fn on_lost(&mut self, ui: usize, cell: &CellId, t: SimTime) -> Result<(), SimError> {
        let ue_id = self.ues[ui].id.clone();
        self.kpm_transition(t, &ue_id, cell, TransitionKind::Detach)?;
        self.ues[ui].detector = None;
        Ok(())
    }

    /// Runs one tick. Returns `false` once the tick at `duration` has run.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let t = self.now();
        if t > self.cfg.duration {
            return Ok(false);
        }
        let ts = t.as_secs_f64();

        for (u, spec) in self.ues.iter_mut().zip(&self.cfg.ues) {
            u.position_m = spec.trajectory.position_at(ts);
        }

        let meas_tick = t.is_multiple_of(self.cfg.meas_period);
        if meas_tick {
            for u in self.ues.iter_mut() {
                for (ci, cell) in self.cfg.cells.iter().enumerate() {
                    let shadow = u.shadows[ci].next(u.position_m);
                    let v = rsrp_at(&self.cfg.radio, cell.position_m, u.position_m, shadow);
                    u.latest.insert(cell.id.clone(), v);
                    self.rsrp_trace.push(RsrpSample {
                        t,
                        ue_id: u.id.clone(),
                        cell_id: cell.id.clone(),
                        rsrp_dbm: v,
                    });
                }
            }
        }

        for ui in 0..self.ues.len() {
            let spec = &self.cfg.ues[ui];
            if spec.attach == t && !self.ues[ui].attached_once {
                if let Some(cell) = crate::handover::strongest(&self.ues[ui].latest) {
                    self.ues[ui].ctx.attach(cell.clone());
                    self.notify("ue_attach", &json!({"ue": spec.id.as_str(), "cell": cell.as_str()}), t);
                    self.on_attached(ui, &cell, t)?;
                }
            }
            if self.cfg.ues[ui].detach == Some(t) {
                if let Some(cell) = self.ues[ui].ctx.detach() {
                    self.notify(
                        "ue_detach",
                        &json!({"ue": self.ues[ui].id.as_str(), "cell": cell.as_str()}),
                        t,
                    );
                    self.on_lost(ui, &cell, t)?;
                }
            }
        }

        if meas_tick {
            for u in self.ues.iter_mut() {
                if !u.ctx.accepts_events() {
                    continue;
                }
                let Some(det) = u.detector.as_mut() else { continue };
                let ctx = &u.ctx;
                let mode = self.cfg.ho.mode;
                let gate = |c: &CellId| mode == HoMode::Traditional || ctx.is_armed(c);
                let events = det.step(t, &u.latest, &self.offsets, &gate)?;
                for ev in events {
                    u.ctx.on_meas_event(&ev, t, &self.cfg.ho)?;
                    self.meas_events.push(ev);
                }
            }
        }

        for ui in 0..self.ues.len() {
            let u = &mut self.ues[ui];
            let r = u.ctx.advance(t, &u.latest, &self.cfg.ho);
            if let Some(a) = r.attempt {
                self.notify(
                    "handover_attempt",
                    &json!({
                        "ue": a.ue_id.as_str(),
                        "source": a.source.as_str(),
                        "target": a.target.as_str(),
                        "mode": a.mode.as_str(),
                        "outcome": a.outcome.as_str(),
                    }),
                    t,
                );
                self.attempts.push(a);
            }
            if let Some(ind) = r.indication {
                self.bus.publish(GNB_PUBLISHER, E2Message::Indication(ind), t)?;
            }
            match r.serving_change {
                Some(ServingChange::Switched { from, to }) => {
                    self.on_lost(ui, &from, t)?;
                    self.on_attached(ui, &to, t)?;
                }
                Some(ServingChange::Lost { from }) => self.on_lost(ui, &from, t)?,
                Some(ServingChange::Reattached { to }) => {
                    self.notify("ue_reattach", &json!({"ue": self.ues[ui].id.as_str(), "cell": to.as_str()}), t);
                    self.on_attached(ui, &to, t)?;
                }
                None => {}
            }
        }

        if let (Some(x), Some(sub)) = (self.xapp.as_mut(), self.xapp_indications) {
            for d in self.bus.deliver(sub, t)? {
                if let E2Message::Indication(ev) = &d.msg {
                    if let Some(dir) = x.on_indication(ev, &self.offsets) {
                        self.bus.publish(XAPP_PUBLISHER, E2Message::Control(dir), t)?;
                    }
                }
            }
        }

        for d in self.bus.deliver(self.gnb_controls, t)? {
            if let E2Message::Control(dir) = &d.msg {
                self.apply_control(dir, t)?;
            }
        }

        if t.is_multiple_of(self.cfg.kpm.sampling) {
            if t > SimTime::ZERO && t.is_multiple_of(self.cfg.kpm.granularity) {
                for k in self.kpm.iter_mut() {
                    self.kpm_reports.push(k.close_period(t, self.cfg.kpm.granularity)?);
                }
            }
            for k in self.kpm.iter_mut() {
                k.sample(t);
            }
        }

        self.next_tick += 1;
        Ok(self.now() <= self.cfg.duration)
    }

    /// Fires the stop hook and assembles the artifacts.
    pub fn finish(self) -> RunArtifacts {
        let end = self.cfg.duration;
        let count = |o: HoOutcome| self.attempts.iter().filter(|a| a.outcome == o).count() as u64;
        let successes_after_last_directive = match self.last_directive_at {
            Some(td) => self
                .attempts
                .iter()
                .filter(|a| a.outcome == HoOutcome::Success && a.t_execute > td)
                .count() as u64,
            None => count(HoOutcome::Success),
        };
        let summary = RunSummary {
            scenario: self.cfg.name.clone(),
            tier: self.cfg.tier,
            seed: self.cfg.seed,
            mode: self.cfg.ho.mode,
            attempts: self.attempts.len() as u64,
            successes: count(HoOutcome::Success),
            fail_rlf: count(HoOutcome::FailRlf),
            fail_rach: count(HoOutcome::FailRach),
            ping_pongs: self.xapp.as_ref().map_or(0, |x| x.detections()),
            directives_applied: self.directives_applied,
            successes_after_last_directive,
            final_offsets: self
                .offsets
                .entries()
                .map(|(p, v)| FinalOffset {
                    cell_a: p.a.clone(),
                    cell_b: p.b.clone(),
                    offset_db: v,
                })
                .collect(),
            state_digest: self.state_digest(),
        };
        self.hooks.fire(
            HookEventKind::Stop,
            "run_end",
            &serde_json::to_value(&summary).expect("summary serializes"),
            end.as_secs_f64(),
        );
        let offset_trace = self.xapp.as_ref().map_or_else(Vec::new, |x| x.offset_trace().to_vec());
        let (audit, hook_events) = self.hooks.into_logs();
        RunArtifacts {
            config: self.cfg,
            rsrp_trace: self.rsrp_trace,
            meas_events: self.meas_events,
            attempts: self.attempts,
            messages: self.bus.into_log(),
            offset_trace,
            kpm_reports: self.kpm_reports,
            milestones: self.milestones,
            audit,
            hook_events,
            summary,
        }
    }
}
