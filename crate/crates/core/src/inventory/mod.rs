//! Inventory-as-code and scenario configuration.
//!
//! An inventory document lists UEs at the top level. Each UE entry carries
//! an optional `plmn` and one block per measured cell:
//!
//! ```text
//! - sierra_ue
//!     - plmn: "00105"
//!     - foxconn01:
//!           distance: close
//!           avg_rsrp_dBm: -75
//!           ru_attn_dB: 10
//! ```
//!
//! Optional top-level keys: `plmn` (network-wide PLMN) and `cells` (explicit
//! cell list; without it the cells are the ones referenced by links, in
//! order of first appearance). A `scenario` section is ignored here and read
//! by [`load_scenario`].

pub mod document;
mod scenario;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ids::{CellId, UeId};
use document::Node;

pub use scenario::{load_scenario, HookSettings, ScenarioCell, ScenarioConfig, Tier, UeSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("inventory has no links")]
    EmptyInventory,
}

/// Lowest and highest reportable NR RSRP.
pub const RSRP_RANGE_DBM: (f64, f64) = (-156.0, -31.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceClass {
    Close,
    Far,
}

impl DistanceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceClass::Close => "close",
            DistanceClass::Far => "far",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UeDecl {
    pub id: UeId,
    pub plmn: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellDecl {
    pub id: CellId,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkDecl {
    pub ue_id: UeId,
    pub cell_id: CellId,
    pub distance_class: DistanceClass,
    pub avg_rsrp_dbm: f64,
    /// Parsed and preserved; no computation uses it.
    pub ru_attn_db: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Inventory {
    /// Top-level PLMN, when declared.
    pub plmn: Option<String>,
    pub ues: Vec<UeDecl>,
    pub cells: Vec<CellDecl>,
    pub links: Vec<LinkDecl>,
    /// Cells came from an explicit `cells` block.
    #[serde(skip)]
    pub cells_declared: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairPolicy {
    Strongest,
    Weakest,
}

fn validation(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

fn check_plmn(node: &Node) -> Result<String, ConfigError> {
    let v = node.scalar()?;
    if !(5..=6).contains(&v.len()) || !v.bytes().all(|b| b.is_ascii_digit()) {
        return Err(validation(format!("plmn `{v}` must be 5 or 6 digits (line {})", node.line)));
    }
    Ok(v.to_string())
}

pub fn load_inventory(text: &str) -> Result<Inventory, ConfigError> {
    let nodes = document::parse(text)?;
    inventory_from_nodes(&nodes)
}

pub(crate) fn inventory_from_nodes(nodes: &[Node]) -> Result<Inventory, ConfigError> {
    let mut inv = Inventory::default();
    let mut declared_cells: Option<Vec<CellId>> = None;
    for n in nodes {
        match (n.key.as_str(), &n.value) {
            ("scenario", None) if !n.dashed => {}
            ("plmn", Some(_)) => {
                if inv.plmn.is_some() {
                    return Err(n.parse_err("duplicate top-level `plmn`"));
                }
                inv.plmn = Some(check_plmn(n)?);
            }
            ("cells", None) if !n.dashed => {
                if declared_cells.is_some() {
                    return Err(n.parse_err("duplicate `cells` block"));
                }
                let mut ids = Vec::new();
                for c in &n.children {
                    if !c.dashed || c.value.is_some() || !c.children.is_empty() {
                        return Err(c.parse_err("cell entries are `- <cell_id>`"));
                    }
                    ids.push(CellId::new(&c.key));
                }
                declared_cells = Some(ids);
            }
            (_, None) if n.dashed => parse_ue(n, &mut inv)?,
            _ => return Err(n.parse_err(format!("unknown top-level key `{}`", n.key))),
        }
    }
    match declared_cells {
        Some(ids) => {
            inv.cells = ids.into_iter().map(|id| CellDecl { id }).collect();
            inv.cells_declared = true;
        }
        None => {
            for l in &inv.links {
                if !inv.cells.iter().any(|c| c.id == l.cell_id) {
                    inv.cells.push(CellDecl { id: l.cell_id.clone() });
                }
            }
        }
    }
    inv.validate()?;
    Ok(inv)
}

fn parse_ue(n: &Node, inv: &mut Inventory) -> Result<(), ConfigError> {
    let ue_id = UeId::new(&n.key);
    let mut decl = UeDecl {
        id: ue_id.clone(),
        plmn: None,
    };
    for c in &n.children {
        if !c.dashed {
            return Err(c.parse_err("UE attributes are list entries (`- key`)"));
        }
        if c.key == "plmn" && c.value.is_some() {
            if decl.plmn.is_some() {
                return Err(c.parse_err("duplicate `plmn`"));
            }
            decl.plmn = Some(check_plmn(c)?);
            continue;
        }
        if c.value.is_some() {
            return Err(c.parse_err(format!("unknown UE attribute `{}`", c.key)));
        }
        inv.links.push(parse_link(&ue_id, c)?);
    }
    inv.ues.push(decl);
    Ok(())
}

fn parse_link(ue_id: &UeId, n: &Node) -> Result<LinkDecl, ConfigError> {
    let mut distance = None;
    let mut rsrp = None;
    let mut attn = None;
    for f in n.block()? {
        if f.dashed {
            return Err(f.parse_err("link fields are plain `key: value` lines"));
        }
        let slot_taken = |taken: bool| {
            if taken {
                Err(f.parse_err(format!("duplicate `{}`", f.key)))
            } else {
                Ok(())
            }
        };
        match f.key.as_str() {
            "distance" => {
                slot_taken(distance.is_some())?;
                distance = Some(match f.scalar()? {
                    "close" => DistanceClass::Close,
                    "far" => DistanceClass::Far,
                    other => return Err(f.parse_err(format!("distance must be close or far, found `{other}`"))),
                });
            }
            "avg_rsrp_dBm" => {
                slot_taken(rsrp.is_some())?;
                rsrp = Some(f.number()?);
            }
            "ru_attn_dB" => {
                slot_taken(attn.is_some())?;
                attn = Some(f.number()?);
            }
            other => return Err(f.parse_err(format!("unknown link field `{other}`"))),
        }
    }
    Ok(LinkDecl {
        ue_id: ue_id.clone(),
        cell_id: CellId::new(&n.key),
        distance_class: distance.ok_or_else(|| n.parse_err(format!("link `{}` is missing `distance`", n.key)))?,
        avg_rsrp_dbm: rsrp.ok_or_else(|| n.parse_err(format!("link `{}` is missing `avg_rsrp_dBm`", n.key)))?,
        ru_attn_db: attn.unwrap_or(0.0),
    })
}

impl Inventory {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(p) = &self.plmn {
            check_plmn(&Node::leaf("plmn", p.clone()))?;
        }
        let mut ue_ids = BTreeSet::new();
        for u in &self.ues {
            if !ue_ids.insert(&u.id) {
                return Err(validation(format!("duplicate UE `{}`", u.id)));
            }
            if let Some(p) = &u.plmn {
                check_plmn(&Node::leaf("plmn", p.clone()))?;
            }
        }
        let mut cell_ids = BTreeSet::new();
        for c in &self.cells {
            if !cell_ids.insert(&c.id) {
                return Err(validation(format!("duplicate cell `{}`", c.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for l in &self.links {
            if !ue_ids.contains(&l.ue_id) {
                return Err(validation(format!("link references undeclared UE `{}`", l.ue_id)));
            }
            if !cell_ids.contains(&l.cell_id) {
                return Err(validation(format!("link references undeclared cell `{}`", l.cell_id)));
            }
            if !seen.insert((&l.ue_id, &l.cell_id)) {
                return Err(validation(format!("duplicate link ({}, {})", l.ue_id, l.cell_id)));
            }
            let (lo, hi) = RSRP_RANGE_DBM;
            if !(lo..=hi).contains(&l.avg_rsrp_dbm) {
                return Err(validation(format!(
                    "avg_rsrp_dBm {} for ({}, {}) outside [{lo}, {hi}]",
                    l.avg_rsrp_dbm, l.ue_id, l.cell_id
                )));
            }
            if l.ru_attn_db.is_nan() || l.ru_attn_db < 0.0 {
                return Err(validation(format!("ru_attn_dB for ({}, {}) must be >= 0", l.ue_id, l.cell_id)));
            }
        }
        Ok(())
    }

    /// Top-level PLMN, or the PLMN shared by every UE that declares one.
    pub fn effective_plmn(&self) -> Option<&str> {
        if let Some(p) = &self.plmn {
            return Some(p);
        }
        let mut it = self.ues.iter().filter_map(|u| u.plmn.as_deref());
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    /// Link with the highest (`Strongest`) or lowest (`Weakest`) average RSRP.
    /// Equal RSRP goes to the lexicographically smaller `(ue_id, cell_id)`.
    pub fn select_pair(&self, policy: PairPolicy) -> Result<(UeId, CellId), ConfigError> {
        let better = |a: &LinkDecl, b: &LinkDecl| {
            let by_rsrp = match policy {
                PairPolicy::Strongest => b.avg_rsrp_dbm.total_cmp(&a.avg_rsrp_dbm),
                PairPolicy::Weakest => a.avg_rsrp_dbm.total_cmp(&b.avg_rsrp_dbm),
            };
            by_rsrp.then_with(|| (&a.ue_id, &a.cell_id).cmp(&(&b.ue_id, &b.cell_id)))
        };
        self.links
            .iter()
            .min_by(|a, b| better(a, b))
            .map(|l| (l.ue_id.clone(), l.cell_id.clone()))
            .ok_or(ConfigError::EmptyInventory)
    }

    pub fn to_nodes(&self) -> Vec<Node> {
        let mut out = Vec::new();
        if let Some(p) = &self.plmn {
            out.push(Node::leaf("plmn", p.clone()).quoted());
        }
        let inferred: Vec<&CellId> = {
            let mut v: Vec<&CellId> = Vec::new();
            for l in &self.links {
                if !v.contains(&&l.cell_id) {
                    v.push(&l.cell_id);
                }
            }
            v
        };
        let listed: Vec<&CellId> = self.cells.iter().map(|c| &c.id).collect();
        if self.cells_declared || listed != inferred {
            out.push(Node::branch(
                "cells",
                self.cells.iter().map(|c| Node::branch(c.id.as_str(), Vec::new()).dashed()).collect(),
            ));
        }
        for u in &self.ues {
            let mut children = Vec::new();
            if let Some(p) = &u.plmn {
                children.push(Node::leaf("plmn", p.clone()).quoted().dashed());
            }
            for l in self.links.iter().filter(|l| l.ue_id == u.id) {
                children.push(
                    Node::branch(
                        l.cell_id.as_str(),
                        vec![
                            Node::leaf("distance", l.distance_class.as_str()),
                            Node::leaf("avg_rsrp_dBm", fmt_num(l.avg_rsrp_dbm)),
                            Node::leaf("ru_attn_dB", fmt_num(l.ru_attn_db)),
                        ],
                    )
                    .dashed(),
                );
            }
            out.push(Node::branch(u.id.as_str(), children).dashed());
        }
        out
    }

    pub fn to_document(&self) -> String {
        document::render(&self.to_nodes())
    }
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v}")
}
