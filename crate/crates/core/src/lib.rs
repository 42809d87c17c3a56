//! Deterministic 5G NR handover simulator.
//!
//! A run wires per-link radio sampling, A3/A4 detectors, traditional and
//! conditional handover state machines, an in-process E2-style bus, a
//! ping-pong mitigation xApp, an RRC.ConnMean KPM collector, and a policy
//! hook plane into one fixed-order tick loop ([`sim`]). Equal scenario and
//! seed produce byte-identical artifacts.

pub mod artifacts;
pub mod campaign;
pub mod e2_bus;
pub mod handover;
pub mod hooks;
pub mod ids;
pub mod inventory;
pub mod kpm;
pub mod meas_events;
pub mod mobility;
pub mod radio;
pub mod sim;
pub mod time;
pub mod xapp;

pub use ids::{CellId, CellPair, UeId};
pub use inventory::{load_inventory, load_scenario, ConfigError, Inventory, ScenarioConfig};
pub use sim::{run, RunArtifacts, SimError};
pub use time::SimTime;
