//! Run logs (JSON Lines), per-channel CSV export and batch summaries.
//!
//! Channels are dotted paths to numeric leaves of a log record, for example
//! `yielding.pose.y` or `driving.wrench_S.fy`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::ArmSide;
use crate::nmpc::SolveDiagnostics;
use crate::pipeline::{FailureModality, Phase, TrialOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Orientation as a rotation vector.
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwistRecord {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WrenchRecord {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

/// One arm at one tick. Pose, twist and command are in the arm's base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmRecord {
    pub side: ArmSide,
    pub pose: PoseRecord,
    pub twist: TwistRecord,
    /// Bias-corrected reading in the sensor frame.
    #[serde(rename = "wrench_S")]
    pub wrench_s: WrenchRecord,
    /// The same reading expressed in the base frame.
    #[serde(rename = "wrench_B")]
    pub wrench_b: WrenchRecord,
    pub command: TwistRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactSummary {
    pub count: usize,
    pub max_penetration_m: f64,
    /// Magnitude of the total force between the two panels.
    pub interface_force_n: f64,
    pub table_force_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmpcRecord {
    pub yielding: SolveDiagnostics,
    pub driving: SolveDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub phase: Phase,
    pub yielding: ArmRecord,
    pub driving: ArmRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nmpc: Option<NmpcRecord>,
    pub contacts: ContactSummary,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn write_runlog(path: &Path, records: &[LogRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut out = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read_runlog(path: &Path) -> Result<Vec<LogRecord>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

fn collect_leaves(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, child) in map {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                collect_leaves(&path, child, out);
            }
        }
        serde_json::Value::Number(_) => out.push(prefix.to_string()),
        _ => {}
    }
}

/// Every numeric channel that appears in at least one record, sorted.
pub fn available_channels(records: &[LogRecord]) -> Result<Vec<String>> {
    let mut all = std::collections::BTreeSet::new();
    for r in records {
        let mut leaves = Vec::new();
        collect_leaves("", &serde_json::to_value(r)?, &mut leaves);
        all.extend(leaves.into_iter().filter(|c| c != "t"));
    }
    Ok(all.into_iter().collect())
}

/// `(t, value)` samples of one channel. Records lacking the channel are skipped.
pub fn channel_series(records: &[LogRecord], channel: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for r in records {
        let v = serde_json::to_value(r)?;
        let leaf = channel.split('.').try_fold(&v, |node, key| node.get(key));
        if let Some(x) = leaf.and_then(|l| l.as_f64()) {
            out.push((r.t, x));
        }
    }
    Ok(out)
}

/// CSV text with a `t,value` header.
pub fn series_csv(series: &[(f64, f64)]) -> String {
    let mut s = String::from("t,value\n");
    for (t, v) in series {
        s.push_str(&format!("{t},{v}\n"));
    }
    s
}

/// Writes `<dir>/<channel>.csv` for each channel. Unknown channels are an
/// error listing the available ones.
pub fn export_csv(records: &[LogRecord], channels: &[String], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    if records.is_empty() {
        return Err(invalid("run log is empty"));
    }
    let available = available_channels(records)?;
    let unknown: Vec<&String> = channels.iter().filter(|c| !available.contains(c)).collect();
    if !unknown.is_empty() {
        return Err(invalid(format!(
            "unknown channel(s) {}; available: {}",
            unknown.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "),
            available.join(", ")
        )));
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for c in channels {
        let path = dir.join(format!("{c}.csv"));
        std::fs::write(&path, series_csv(&channel_series(records, c)?)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Success and failure accounting over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub success_rate: f64,
    pub failure_rate: f64,
    pub failure_counts: BTreeMap<FailureModality, usize>,
    /// Fraction of the failures in each modality; all zero without failures.
    pub failure_shares: BTreeMap<FailureModality, f64>,
    pub seed: u64,
}

impl BatchSummary {
    pub fn from_outcomes(outcomes: &[TrialOutcome], seed: u64) -> Self {
        let trials = outcomes.len();
        let successes = outcomes.iter().filter(|o| o.success).count();
        let failures = trials - successes;
        let mut failure_counts: BTreeMap<FailureModality, usize> = FailureModality::ALL.iter().map(|m| (*m, 0)).collect();
        for o in outcomes {
            if let Some(m) = o.failure {
                *failure_counts.entry(m).or_default() += 1;
            }
        }
        let failure_shares = failure_counts
            .iter()
            .map(|(m, c)| (*m, if failures > 0 { *c as f64 / failures as f64 } else { 0.0 }))
            .collect();
        let rate = |n: usize| if trials > 0 { n as f64 / trials as f64 } else { 0.0 };
        BatchSummary {
            trials,
            successes,
            failures,
            success_rate: rate(successes),
            failure_rate: rate(failures),
            failure_counts,
            failure_shares,
            seed,
        }
    }

    /// Modality with the most failures, if any failed.
    pub fn dominant_failure(&self) -> Option<FailureModality> {
        if self.failures == 0 {
            return None;
        }
        self.failure_counts.iter().max_by_key(|(_, c)| **c).map(|(m, _)| *m)
    }
}
