//! The `scenario:` section of a configuration document.
//!
//! ```text
//! scenario:
//!     name: wobble
//!     duration_s: 60
//!     cells:
//!         - cell_a: 0
//!         - cell_b: 20
//!     ues:
//!         - ue1:
//!               trajectory: wobble
//!               a_m: 4
//!               b_m: 16
//!               speed_kmh: 12
//!     a3:
//!         initial_offset_dB: 5
//!         hysteresis_dB: 2
//! ```
//!
//! Every other section (`radio`, `a4`, `ho`, `kpm`, `bus`, `xapp`, `hooks`)
//! and every scalar except `name`, `duration_s`, and `cells` is optional and
//! falls back to the defaults documented in `docs/config-format.md`.

use serde::Serialize;

use super::document::{self, Node};
use super::{inventory_from_nodes, ConfigError, Inventory};
use crate::e2_bus::BusParams;
use crate::handover::{HoMode, HoParams};
use crate::ids::{CellId, UeId};
use crate::kpm::KpmParams;
use crate::meas_events::{A3Params, A4Params, OFFSET_CAP_DB};
use crate::mobility::{kmh_to_mps, Trajectory};
use crate::radio::RadioParams;
use crate::time::SimTime;
use crate::xapp::XappConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Simulation,
    Emulation,
    Ota,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Simulation => "simulation",
            Tier::Emulation => "emulation",
            Tier::Ota => "ota",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioCell {
    pub id: CellId,
    pub position_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UeSpec {
    pub id: UeId,
    pub trajectory: Trajectory,
    pub attach: SimTime,
    pub detach: Option<SimTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HookSettings {
    /// Control directives requesting a larger offset magnitude are blocked.
    pub max_abs_offset_db: f64,
    /// Lets OTA-tier bring-up actions through.
    pub allow_ota: bool,
}

impl Default for HookSettings {
    fn default() -> Self {
        HookSettings {
            max_abs_offset_db: OFFSET_CAP_DB,
            allow_ota: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub tier: Tier,
    pub duration: SimTime,
    pub tick: SimTime,
    pub meas_period: SimTime,
    pub seed: u64,
    pub cells: Vec<ScenarioCell>,
    pub radio: RadioParams,
    pub ues: Vec<UeSpec>,
    pub a3: A3Params,
    pub a4: A4Params,
    pub ho: HoParams,
    pub kpm: KpmParams,
    pub bus: BusParams,
    /// `None` when the xApp is disabled.
    pub xapp: Option<XappConfig>,
    pub hooks: HookSettings,
    /// Inventory entries carried in the same document.
    #[serde(skip)]
    pub inventory: Inventory,
}

pub fn default_radio() -> RadioParams {
    RadioParams {
        ref_power_dbm: -40.0,
        exponent: 1.9,
        shadowing_sigma_db: 0.0,
        min_distance_m: 1.0,
        decorrelation_m: 50.0,
    }
}

pub fn default_ho() -> HoParams {
    HoParams {
        mode: HoMode::Traditional,
        d_prep: secs_const(0.2),
        d_exec_trad: secs_const(0.8),
        d_exec_cho: secs_const(0.05),
        q_out_dbm: -95.0,
        q_rach_dbm: -105.0,
        t_reattach: secs_const(1.0),
        max_armed: 1,
    }
}

fn secs_const(s: f64) -> SimTime {
    SimTime::from_secs_f64(s).expect("constant is a valid time")
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

/// Keyed children of one block; tracks which keys were consumed.
struct Fields<'a> {
    owner: &'a str,
    nodes: &'a [Node],
    used: Vec<bool>,
}

impl<'a> Fields<'a> {
    fn of(node: &'a Node) -> Result<Self, ConfigError> {
        let nodes = node.block()?;
        for n in nodes {
            if n.dashed {
                return Err(n.parse_err(format!("`{}` entries are plain `key: value` lines", node.key)));
            }
        }
        for (i, a) in nodes.iter().enumerate() {
            if nodes[..i].iter().any(|b| b.key == a.key) {
                return Err(a.parse_err(format!("duplicate key `{}`", a.key)));
            }
        }
        Ok(Fields {
            owner: &node.key,
            nodes,
            used: vec![false; nodes.len()],
        })
    }

    fn take(&mut self, key: &str) -> Option<&'a Node> {
        let i = self.nodes.iter().position(|n| n.key == key)?;
        self.used[i] = true;
        Some(&self.nodes[i])
    }

    fn num(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.take(key).map_or(Ok(default), |n| n.number())
    }

    fn req(&mut self, key: &str) -> Result<&'a Node, ConfigError> {
        self.take(key)
            .ok_or_else(|| invalid(format!("`{}` is missing required key `{key}`", self.owner)))
    }

    fn req_num(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.req(key)?.number()
    }

    fn time(&mut self, key: &str, default: f64) -> Result<SimTime, ConfigError> {
        match self.take(key) {
            Some(n) => to_time(n),
            None => SimTime::from_secs_f64(default).ok_or_else(|| invalid(format!("bad default for `{key}`"))),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.used.iter().position(|u| !u) {
            Some(i) => {
                let n = &self.nodes[i];
                Err(n.parse_err(format!("unknown key `{}` in `{}`", n.key, self.owner)))
            }
            None => Ok(()),
        }
    }
}

fn to_time(n: &Node) -> Result<SimTime, ConfigError> {
    let v = n.number()?;
    SimTime::from_secs_f64(v).ok_or_else(|| invalid(format!("`{}` must be a non-negative time, found {v}", n.key)))
}

pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let nodes = document::parse(text)?;
    let inventory = inventory_from_nodes(&nodes)?;
    let mut sections = nodes.iter().filter(|n| n.key == "scenario" && !n.dashed && n.value.is_none());
    let sc = sections
        .next()
        .ok_or_else(|| invalid("document has no `scenario:` section"))?;
    if let Some(dup) = sections.next() {
        return Err(dup.parse_err("duplicate `scenario` section"));
    }
    let mut f = Fields::of(sc)?;

    let name = f.req("name")?.scalar()?.to_string();
    let tier = match f.take("tier").map(|n| n.scalar()).transpose()? {
        None | Some("simulation") => Tier::Simulation,
        Some("emulation") => Tier::Emulation,
        Some("ota") => Tier::Ota,
        Some(other) => return Err(invalid(format!("tier must be simulation, emulation, or ota, found `{other}`"))),
    };
    let duration_node = f.req("duration_s")?;
    if duration_node.number()? <= 0.0 {
        return Err(invalid("duration_s must be > 0"));
    }
    let duration = to_time(duration_node)?;
    let tick = f.time("tick_s", 0.01)?;
    let meas_period = f.time("meas_period_s", 0.2)?;
    let seed = f.take("seed").map_or(Ok(0), |n| n.unsigned())?;

    let mut cells = Vec::new();
    for c in f.req("cells")?.block()? {
        if !c.dashed {
            return Err(c.parse_err("cell entries are `- <cell_id>: <position_m>`"));
        }
        cells.push(ScenarioCell {
            id: CellId::new(&c.key),
            position_m: c.number()?,
        });
    }

    let radio = match f.take("radio") {
        None => default_radio(),
        Some(n) => parse_radio(n)?,
    };

    let mut ues = Vec::new();
    if let Some(n) = f.take("ues") {
        for u in n.block()? {
            if !u.dashed {
                return Err(u.parse_err("UE entries are `- <ue_id>:` blocks"));
            }
            ues.push(parse_ue(u)?);
        }
    }

    let a3 = match f.take("a3") {
        None => A3Params {
            initial_offset_db: 0.0,
            hysteresis_db: 0.0,
            ttt: SimTime::ZERO,
        },
        Some(n) => {
            let mut s = Fields::of(n)?;
            let p = A3Params {
                initial_offset_db: s.num("initial_offset_dB", 0.0)?,
                hysteresis_db: s.num("hysteresis_dB", 0.0)?,
                ttt: s.time("ttt_s", 0.0)?,
            };
            s.finish()?;
            p
        }
    };
    let a4 = match f.take("a4") {
        None => A4Params {
            threshold_dbm: -100.0,
            hysteresis_db: 0.0,
            ttt: SimTime::ZERO,
        },
        Some(n) => {
            let mut s = Fields::of(n)?;
            let p = A4Params {
                threshold_dbm: s.num("threshold_dBm", -100.0)?,
                hysteresis_db: s.num("hysteresis_dB", 0.0)?,
                ttt: s.time("ttt_s", 0.0)?,
            };
            s.finish()?;
            p
        }
    };
    let ho = match f.take("ho") {
        None => default_ho(),
        Some(n) => parse_ho(n)?,
    };
    let kpm = match f.take("kpm") {
        None => KpmParams::default(),
        Some(n) => {
            let mut s = Fields::of(n)?;
            let p = KpmParams {
                granularity: s.time("granularity_s", 10.0)?,
                sampling: s.time("sampling_s", 1.0)?,
            };
            s.finish()?;
            p
        }
    };
    let bus = match f.take("bus") {
        None => BusParams::default(),
        Some(n) => {
            let mut s = Fields::of(n)?;
            let p = BusParams {
                indication_delay: s.time("indication_delay_s", 0.0)?,
                control_delay: s.time("control_delay_s", 0.0)?,
            };
            s.finish()?;
            p
        }
    };
    let xapp = match f.take("xapp") {
        None => Some(XappConfig::default()),
        Some(n) => {
            let mut s = Fields::of(n)?;
            let enabled = s.take("enabled").map_or(Ok(true), |n| n.boolean())?;
            let d = XappConfig::default();
            let cfg = XappConfig {
                t_pp: s.time("t_pp_s", d.t_pp.as_secs_f64())?,
                step_db: s.num("step_dB", d.step_db)?,
                ring_capacity: match s.take("ring_capacity") {
                    None => d.ring_capacity,
                    Some(n) => usize::try_from(n.unsigned()?).map_err(|_| n.parse_err("ring_capacity too large"))?,
                },
                offset_cap_db: s.num("offset_cap_dB", d.offset_cap_db)?,
            };
            s.finish()?;
            enabled.then_some(cfg)
        }
    };
    let hooks = match f.take("hooks") {
        None => HookSettings::default(),
        Some(n) => {
            let mut s = Fields::of(n)?;
            let d = HookSettings::default();
            let h = HookSettings {
                max_abs_offset_db: s.num("max_abs_offset_dB", d.max_abs_offset_db)?,
                allow_ota: s.take("allow_ota").map_or(Ok(d.allow_ota), |n| n.boolean())?,
            };
            s.finish()?;
            h
        }
    };
    f.finish()?;

    let cfg = ScenarioConfig {
        name,
        tier,
        duration,
        tick,
        meas_period,
        seed,
        cells,
        radio,
        ues,
        a3,
        a4,
        ho,
        kpm,
        bus,
        xapp,
        hooks,
        inventory,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_radio(n: &Node) -> Result<RadioParams, ConfigError> {
    let d = default_radio();
    let mut s = Fields::of(n)?;
    let p = RadioParams {
        ref_power_dbm: s.num("ref_power_dBm", d.ref_power_dbm)?,
        exponent: s.num("exponent", d.exponent)?,
        shadowing_sigma_db: s.num("shadowing_sigma_dB", d.shadowing_sigma_db)?,
        min_distance_m: s.num("min_distance_m", d.min_distance_m)?,
        decorrelation_m: s.num("decorrelation_m", d.decorrelation_m)?,
    };
    s.finish()?;
    Ok(p)
}

fn parse_ho(n: &Node) -> Result<HoParams, ConfigError> {
    let d = default_ho();
    let mut s = Fields::of(n)?;
    let mode = match s.take("mode") {
        None => d.mode,
        Some(m) => {
            let v = m.scalar()?;
            HoMode::parse(v).ok_or_else(|| m.parse_err(format!("mode must be traditional or cho, found `{v}`")))?
        }
    };
    let p = HoParams {
        mode,
        d_prep: s.time("d_prep_s", d.d_prep.as_secs_f64())?,
        d_exec_trad: s.time("d_exec_trad_s", d.d_exec_trad.as_secs_f64())?,
        d_exec_cho: s.time("d_exec_cho_s", d.d_exec_cho.as_secs_f64())?,
        q_out_dbm: s.num("q_out_dBm", d.q_out_dbm)?,
        q_rach_dbm: s.num("q_rach_dBm", d.q_rach_dbm)?,
        t_reattach: s.time("t_reattach_s", d.t_reattach.as_secs_f64())?,
        max_armed: match s.take("max_armed") {
            None => d.max_armed,
            Some(n) => usize::try_from(n.unsigned()?).map_err(|_| n.parse_err("max_armed too large"))?,
        },
    };
    s.finish()?;
    Ok(p)
}

fn parse_ue(n: &Node) -> Result<UeSpec, ConfigError> {
    let mut s = Fields::of(n)?;
    let kind = s.req("trajectory")?.scalar()?;
    let speed = |s: &mut Fields| -> Result<f64, ConfigError> {
        match (s.take("speed_kmh"), s.take("speed_mps")) {
            (Some(k), None) => Ok(kmh_to_mps(k.number()?)),
            (None, Some(m)) => m.number(),
            _ => Err(n.parse_err(format!("UE `{}` needs exactly one of speed_kmh or speed_mps", n.key))),
        }
    };
    let trajectory = match kind {
        "wobble" => Trajectory::Wobble {
            a_m: s.req_num("a_m")?,
            b_m: s.req_num("b_m")?,
            speed_mps: speed(&mut s)?,
        },
        "shuttle" => Trajectory::ShuttleLoop {
            x0_m: s.req_num("x0_m")?,
            x1_m: s.req_num("x1_m")?,
            speed_mps: speed(&mut s)?,
            dwell_s: s.num("dwell_s", 0.0)?,
        },
        "static" => Trajectory::Static { x_m: s.req_num("x_m")? },
        other => {
            return Err(n.parse_err(format!("trajectory must be wobble, shuttle, or static, found `{other}`")))
        }
    };
    let attach = s.time("attach_s", 0.0)?;
    let detach = s.take("detach_s").map(to_time).transpose()?;
    s.finish()?;
    Ok(UeSpec {
        id: UeId::new(&n.key),
        trajectory,
        attach,
        detach,
    })
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name must not be empty"));
        }
        if self.duration == SimTime::ZERO {
            return Err(invalid("duration_s must be > 0"));
        }
        if self.tick == SimTime::ZERO {
            return Err(invalid("tick_s must be > 0"));
        }
        if !self.duration.is_multiple_of(self.tick) {
            return Err(invalid(format!("duration_s {} is not a multiple of tick_s {}", self.duration, self.tick)));
        }
        if self.meas_period < self.tick || !self.meas_period.is_multiple_of(self.tick) {
            return Err(invalid(format!(
                "meas_period_s {} must be a positive multiple of tick_s {}",
                self.meas_period, self.tick
            )));
        }

        if self.cells.is_empty() {
            return Err(invalid("at least one cell is required"));
        }
        for (i, c) in self.cells.iter().enumerate() {
            if !c.position_m.is_finite() {
                return Err(invalid(format!("cell `{}` position must be finite", c.id)));
            }
            for o in &self.cells[..i] {
                if o.id == c.id {
                    return Err(invalid(format!("duplicate cell `{}`", c.id)));
                }
                if o.position_m == c.position_m {
                    return Err(invalid(format!("cells `{}` and `{}` share a position", o.id, c.id)));
                }
                if (o.position_m - c.position_m).abs() < self.radio.min_distance_m {
                    return Err(invalid(format!(
                        "cells `{}` and `{}` are closer than min_distance_m",
                        o.id, c.id
                    )));
                }
            }
        }
        self.radio.validate().map_err(invalid)?;

        for (i, u) in self.ues.iter().enumerate() {
            if self.ues[..i].iter().any(|o| o.id == u.id) {
                return Err(invalid(format!("duplicate UE `{}`", u.id)));
            }
            u.trajectory
                .validate()
                .map_err(|m| invalid(format!("UE `{}`: {m}", u.id)))?;
            if !u.attach.is_multiple_of(self.tick) {
                return Err(invalid(format!("UE `{}`: attach_s must lie on the tick grid", u.id)));
            }
            if let Some(d) = u.detach {
                if d <= u.attach || !d.is_multiple_of(self.tick) {
                    return Err(invalid(format!(
                        "UE `{}`: detach_s must follow attach_s on the tick grid",
                        u.id
                    )));
                }
            }
        }

        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be finite")))
            }
        };
        finite(self.a3.initial_offset_db, "a3 initial_offset_dB")?;
        if self.a3.initial_offset_db.abs() > OFFSET_CAP_DB {
            return Err(invalid(format!("a3 initial_offset_dB must lie within ±{OFFSET_CAP_DB}")));
        }
        finite(self.a3.hysteresis_db, "a3 hysteresis_dB")?;
        finite(self.a4.threshold_dbm, "a4 threshold_dBm")?;
        finite(self.a4.hysteresis_db, "a4 hysteresis_dB")?;
        if self.a3.hysteresis_db < 0.0 || self.a4.hysteresis_db < 0.0 {
            return Err(invalid("hysteresis_dB must be >= 0"));
        }
        self.ho.validate().map_err(invalid)?;
        self.kpm.validate().map_err(invalid)?;
        if !self.kpm.sampling.is_multiple_of(self.tick) {
            return Err(invalid("kpm sampling_s must be a multiple of tick_s"));
        }
        if let Some(x) = &self.xapp {
            x.validate().map_err(invalid)?;
        }
        if !(self.hooks.max_abs_offset_db.is_finite() && self.hooks.max_abs_offset_db > 0.0) {
            return Err(invalid("hooks max_abs_offset_dB must be > 0"));
        }
        Ok(())
    }

    pub fn cell_ids(&self) -> Vec<CellId> {
        self.cells.iter().map(|c| c.id.clone()).collect()
    }

    /// Number of ticks in the run, counting both t=0 and t=duration.
    pub fn tick_count(&self) -> u64 {
        self.duration.as_nanos() / self.tick.as_nanos() + 1
    }
}
