//! Scenario resolution, replication sweeps, and success tables.
//!
//! Replication `i` of a sweep runs with seed `base_seed + i`, so any row can
//! be re-run on its own with `chosim run --seed`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::artifacts::{self, ArtifactError};
use crate::handover::{HoMode, HoOutcome};
use crate::inventory::{load_scenario, ConfigError, ScenarioConfig};
use crate::mobility::kmh_to_mps;
use crate::sim::{self, SimError};

pub const BUILTIN_PREFIX: &str = "builtin:";

/// Scenarios compiled into the binary, addressable as `builtin:<name>`.
pub const BUILTINS: [(&str, &str); 4] = [
    ("wobble", include_str!("../scenarios/wobble.scenario")),
    ("speed_sweep", include_str!("../scenarios/speed_sweep.scenario")),
    ("cho_chain", include_str!("../scenarios/cho_chain.scenario")),
    ("kpm_replay", include_str!("../scenarios/kpm_replay.scenario")),
];

pub const SUCCESS_TABLE_FILE: &str = "success_table.csv";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("cannot read scenario {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unsupported sweep axis `{0}` (expected speed_kmh or shadowing_sigma_dB)")]
    UnknownAxis(String),
    #[error("sweep needs at least one axis value, one mode, and one replication")]
    EmptySweep,
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

impl CampaignError {
    /// True for errors caused by the inputs rather than by running them.
    pub fn is_usage(&self) -> bool {
        !matches!(self, CampaignError::Artifact(_) | CampaignError::Pool(_))
    }
}

/// Loads `builtin:<name>` or a scenario file path.
pub fn resolve_scenario(spec: &str) -> Result<ScenarioConfig, CampaignError> {
    if let Some(name) = spec.strip_prefix(BUILTIN_PREFIX) {
        let text = BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| CampaignError::UnknownBuiltin(name.to_string()))?;
        return Ok(load_scenario(text)?);
    }
    let path = PathBuf::from(spec);
    let text = fs::read_to_string(&path).map_err(|source| CampaignError::Read { path, source })?;
    Ok(load_scenario(&text)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Axis {
    /// Every UE's trajectory speed, in km/h.
    SpeedKmh,
    /// Shadowing standard deviation, in dB.
    ShadowingSigmaDb,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Axis, CampaignError> {
        match s {
            "speed_kmh" => Ok(Axis::SpeedKmh),
            "shadowing_sigma_dB" => Ok(Axis::ShadowingSigmaDb),
            other => Err(CampaignError::UnknownAxis(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::SpeedKmh => "speed_kmh",
            Axis::ShadowingSigmaDb => "shadowing_sigma_dB",
        }
    }

    /// Returns `cfg` with this axis set to `value`, revalidated.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, CampaignError> {
        let mut c = cfg.clone();
        match self {
            Axis::SpeedKmh => {
                for u in c.ues.iter_mut() {
                    u.trajectory = u.trajectory.with_speed(kmh_to_mps(value));
                }
            }
            Axis::ShadowingSigmaDb => c.radio.shadowing_sigma_db = value,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub scenario: ScenarioConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub modes: Vec<HoMode>,
    pub replications: u32,
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuccessRow {
    pub axis_value: f64,
    pub mode: HoMode,
    pub successes: u64,
    pub attempts: u64,
    /// `None` when no attempt was made.
    pub rate_percent: Option<f64>,
    pub aborted_runs: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SuccessTable {
    pub axis: String,
    pub rows: Vec<SuccessRow>,
}

impl SuccessTable {
    pub fn row(&self, value: f64, mode: HoMode) -> Option<&SuccessRow> {
        self.rows.iter().find(|r| r.axis_value == value && r.mode == mode)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},mode,successes,attempts,rate_percent,aborted_runs\n", self.axis);
        for r in &self.rows {
            let rate = r.rate_percent.map_or_else(String::new, |v| format!("{v:.1}"));
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.axis_value,
                r.mode.as_str(),
                r.successes,
                r.attempts,
                rate,
                r.aborted_runs
            );
        }
        s
    }
}

#[derive(Debug)]
pub struct RunFailure {
    pub axis_value: f64,
    pub mode: HoMode,
    pub seed: u64,
    pub error: SimError,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub table: SuccessTable,
    pub failures: Vec<RunFailure>,
}

struct Job {
    value: f64,
    mode: HoMode,
    seed: u64,
    cfg: ScenarioConfig,
}

/// Per-run directory name inside a sweep output directory.
pub fn run_dir_name(axis: Axis, value: f64, mode: HoMode, seed: u64) -> String {
    format!("{}_{}_{}_seed{}", axis.as_str(), value, mode.as_str(), seed)
}

/// Runs every (value, mode, replication) combination on up to `workers`
/// threads. Rows come out in (value, mode) order regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec, workers: usize, out: Option<&Path>) -> Result<SweepOutcome, CampaignError> {
    if spec.values.is_empty() || spec.modes.is_empty() || spec.replications == 0 {
        return Err(CampaignError::EmptySweep);
    }
    let mut jobs = Vec::new();
    for &value in &spec.values {
        let base = spec.axis.apply(&spec.scenario, value)?;
        for &mode in &spec.modes {
            for i in 0..spec.replications {
                let mut cfg = base.clone();
                cfg.ho.mode = mode;
                cfg.seed = spec.base_seed.wrapping_add(u64::from(i));
                cfg.validate()?;
                jobs.push(Job {
                    value,
                    mode,
                    seed: cfg.seed,
                    cfg,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    type JobResult = Result<Result<(u64, u64), SimError>, ArtifactError>;
    let results: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|j| -> JobResult {
                let a = match sim::run(&j.cfg) {
                    Ok(a) => a,
                    Err(e) => return Ok(Err(e)),
                };
                if let Some(dir) = out {
                    artifacts::write_dir(&a, &dir.join(run_dir_name(spec.axis, j.value, j.mode, j.seed)))?;
                }
                let ok = a.attempts.iter().filter(|h| h.outcome == HoOutcome::Success).count() as u64;
                Ok(Ok((ok, a.attempts.len() as u64)))
            })
            .collect()
    });

    let mut table = SuccessTable {
        axis: spec.axis.as_str().to_string(),
        rows: Vec::new(),
    };
    let mut failures = Vec::new();
    for (job, res) in jobs.into_iter().zip(results) {
        if table.rows.last().is_none_or(|r| r.axis_value != job.value || r.mode != job.mode) {
            table.rows.push(SuccessRow {
                axis_value: job.value,
                mode: job.mode,
                successes: 0,
                attempts: 0,
                rate_percent: None,
                aborted_runs: 0,
            });
        }
        let row = table.rows.last_mut().expect("row pushed above");
        match res? {
            Ok((s, n)) => {
                row.successes += s;
                row.attempts += n;
            }
            Err(error) => {
                row.aborted_runs += 1;
                failures.push(RunFailure {
                    axis_value: job.value,
                    mode: job.mode,
                    seed: job.seed,
                    error,
                });
            }
        }
    }
    for r in table.rows.iter_mut() {
        r.rate_percent = (r.attempts > 0).then(|| 100.0 * r.successes as f64 / r.attempts as f64);
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|source| ArtifactError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(SUCCESS_TABLE_FILE);
        fs::write(&path, table.to_csv()).map_err(|source| ArtifactError::Io { path, source })?;
    }
    Ok(SweepOutcome { table, failures })
}
