//! On-disk artifact bundle and golden comparison.
//!
//! One directory per run. Tables are CSV with a header row; logs are one JSON
//! object per line; the summary is a pretty-printed JSON document. Floats are
//! written in shortest round-trip form so equal runs give equal bytes.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::kpm::{REPORT_FORMAT, REPORT_STYLE};
use crate::sim::RunArtifacts;
use crate::time::SimTime;

pub const CONFIG_FILE: &str = "config.json";
pub const RSRP_TRACE_FILE: &str = "rsrp_trace.csv";
pub const MEAS_EVENTS_FILE: &str = "meas_events.csv";
pub const ATTEMPTS_FILE: &str = "attempts.csv";
pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const OFFSET_TRACE_FILE: &str = "offset_trace.csv";
pub const KPM_REPORTS_FILE: &str = "kpm_reports.csv";
pub const MILESTONES_FILE: &str = "milestones.csv";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const HOOK_EVENTS_FILE: &str = "hook_events.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Every file in a bundle, in the order they are compared.
pub const ARTIFACT_FILES: [&str; 11] = [
    CONFIG_FILE,
    RSRP_TRACE_FILE,
    MEAS_EVENTS_FILE,
    ATTEMPTS_FILE,
    MESSAGES_FILE,
    OFFSET_TRACE_FILE,
    KPM_REPORTS_FILE,
    MILESTONES_FILE,
    AUDIT_FILE,
    HOOK_EVENTS_FILE,
    SUMMARY_FILE,
];

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact {0}")]
    Missing(PathBuf),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ts(t: SimTime) -> String {
    t.to_string()
}

fn opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |v| v.to_string())
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, ArtifactError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| ArtifactError::Csv(e.into_error().into()))
}

fn jsonl_bytes<T: Serialize>(items: &[T]) -> Result<Vec<u8>, ArtifactError> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Renders every artifact file in memory, keyed by file name.
pub fn render(a: &RunArtifacts) -> Result<Vec<(&'static str, Vec<u8>)>, ArtifactError> {
    let mut config = serde_json::to_vec_pretty(&a.config)?;
    config.push(b'\n');
    let mut summary = serde_json::to_vec_pretty(&a.summary)?;
    summary.push(b'\n');
    Ok(vec![
        (CONFIG_FILE, config),
        (
            RSRP_TRACE_FILE,
            csv_bytes(
                &["t_s", "ue_id", "cell_id", "rsrp_dBm"],
                a.rsrp_trace
                    .iter()
                    .map(|s| vec![ts(s.t), s.ue_id.to_string(), s.cell_id.to_string(), s.rsrp_dbm.to_string()]),
            )?,
        ),
        (
            MEAS_EVENTS_FILE,
            csv_bytes(
                &["t_s", "ue_id", "kind", "serving_cell", "neighbor_cell", "neighbor_rsrp_dBm"],
                a.meas_events.iter().map(|e| {
                    vec![
                        ts(e.t),
                        e.ue_id.to_string(),
                        e.kind.as_str().to_string(),
                        e.serving_cell.to_string(),
                        e.neighbor_cell.to_string(),
                        e.neighbor_rsrp_dbm.to_string(),
                    ]
                }),
            )?,
        ),
        (
            ATTEMPTS_FILE,
            csv_bytes(
                &["ue_id", "mode", "source", "target", "t_armed_s", "t_trigger_s", "t_execute_s", "outcome"],
                a.attempts.iter().map(|h| {
                    vec![
                        h.ue_id.to_string(),
                        h.mode.as_str().to_string(),
                        h.source.to_string(),
                        h.target.to_string(),
                        opt(&h.t_armed),
                        ts(h.t_trigger),
                        ts(h.t_execute),
                        h.outcome.as_str().to_string(),
                    ]
                }),
            )?,
        ),
        (MESSAGES_FILE, jsonl_bytes(&a.messages)?),
        (
            OFFSET_TRACE_FILE,
            csv_bytes(
                &["t_s", "cell_a", "cell_b", "offset_dB"],
                a.offset_trace
                    .iter()
                    .map(|o| vec![ts(o.t), o.pair.a.to_string(), o.pair.b.to_string(), o.offset_db.to_string()]),
            )?,
        ),
        (
            KPM_REPORTS_FILE,
            csv_bytes(
                &["period_end_s", "cell_id", "meas_name", "report_style", "report_format", "value"],
                a.kpm_reports.iter().map(|r| {
                    vec![
                        ts(r.period_end),
                        r.cell_id.to_string(),
                        r.meas_name.to_string(),
                        REPORT_STYLE.to_string(),
                        REPORT_FORMAT.to_string(),
                        r.value.to_string(),
                    ]
                }),
            )?,
        ),
        (
            MILESTONES_FILE,
            csv_bytes(
                &["t_s", "cell_id", "milestone"],
                a.milestones
                    .entries
                    .iter()
                    .map(|m| vec![ts(m.t), m.cell_id.to_string(), m.milestone.as_str().to_string()]),
            )?,
        ),
        (AUDIT_FILE, jsonl_bytes(&a.audit)?),
        (HOOK_EVENTS_FILE, jsonl_bytes(&a.hook_events)?),
        (SUMMARY_FILE, summary),
    ])
}

/// Writes the bundle into `dir`, creating it if needed.
pub fn write_dir(a: &RunArtifacts, dir: &Path) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, bytes) in render(a)? {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(&bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileDiff {
    pub file: &'static str,
    /// 1-based line number; the header is line 1.
    pub line: usize,
    pub golden: Option<String>,
    pub candidate: Option<String>,
}

impl std::fmt::Display for FileDiff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |s: &Option<String>| s.clone().unwrap_or_else(|| "<end of file>".into());
        write!(
            f,
            "{} line {}: golden `{}` vs candidate `{}`",
            self.file,
            self.line,
            show(&self.golden),
            show(&self.candidate)
        )
    }
}

/// Compares two bundles file by file. Line endings are normalized; everything
/// else must match byte for byte. Returns the first differing line per file.
pub fn verify_dirs(golden: &Path, candidate: &Path) -> Result<Vec<FileDiff>, ArtifactError> {
    let mut diffs = Vec::new();
    for name in ARTIFACT_FILES {
        let read = |dir: &Path| -> Result<String, ArtifactError> {
            let p = dir.join(name);
            if !p.is_file() {
                return Err(ArtifactError::Missing(p));
            }
            fs::read_to_string(&p).map_err(io_err(&p))
        };
        let g = read(golden)?;
        let c = read(candidate)?;
        let mut gl = g.lines().map(|l| l.trim_end_matches('\r'));
        let mut cl = c.lines().map(|l| l.trim_end_matches('\r'));
        let mut line = 0;
        loop {
            line += 1;
            match (gl.next(), cl.next()) {
                (None, None) => break,
                (a, b) if a == b => {}
                (a, b) => {
                    diffs.push(FileDiff {
                        file: name,
                        line,
                        golden: a.map(str::to_string),
                        candidate: b.map(str::to_string),
                    });
                    break;
                }
            }
        }
    }
    Ok(diffs)
}
