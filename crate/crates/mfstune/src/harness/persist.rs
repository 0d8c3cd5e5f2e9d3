//! Append-only newline-delimited JSON persistence for tuning runs: one
//! run-start record, one record per completed trial (synced to disk at every
//! entry boundary), and a run-end record. Replaying a file reconstructs the
//! in-memory ledger exactly, which is what `--resume` builds on.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ThetaVector;
use crate::tuner::{Ledger, LedgerEntry, Strategy, TunerConfig, TuningResult};

/// Identity of a run, persisted up front and checked on resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub seed: u64,
    pub strategy: Strategy,
    pub preemptive: bool,
    pub budget: usize,
    pub trial_len: usize,
    pub trial_min: usize,
    pub warmup: usize,
    pub region: String,
}

impl RunHeader {
    pub fn from_config(config: &TunerConfig) -> Self {
        RunHeader {
            seed: config.seed,
            strategy: config.strategy,
            preemptive: config.preemptive,
            budget: config.budget,
            trial_len: config.trial_len,
            trial_min: config.trial_min,
            warmup: config.warmup,
            region: config.region.name.clone(),
        }
    }
}

/// One line of a persisted run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LedgerRecord {
    RunStart {
        #[serde(flatten)]
        header: RunHeader,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts_unix_ms: Option<u64>,
    },
    Entry {
        index: usize,
        seed: u64,
        /// Random stream feeding this trial's dipole draws.
        dipole_stream: u64,
        /// Random stream feeding this trial's suggestion.
        suggest_stream: u64,
        theta: [f64; 5],
        q_values: Vec<f64>,
        preempted: bool,
        failed: bool,
        budget_truncated: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts_unix_ms: Option<u64>,
    },
    RunEnd {
        evaluations_used: usize,
        distinct_theta: usize,
        best_theta: Option<[f64; 5]>,
        best_mean: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts_unix_ms: Option<u64>,
    },
}

fn now_ms(enabled: bool) -> Option<u64> {
    enabled.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

/// Writes run records, syncing at every entry boundary so a crash leaves a
/// clean replayable prefix.
pub struct LedgerWriter {
    writer: BufWriter<File>,
    path: PathBuf,
    seed: u64,
    timestamps: bool,
}

impl LedgerWriter {
    /// Start a fresh run file (truncates any previous content).
    pub fn create(path: &Path, config: &TunerConfig, timestamps: bool) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = File::create(path)?;
        let mut writer = LedgerWriter {
            writer: BufWriter::new(file),
            path: path.to_path_buf(),
            seed: config.seed,
            timestamps,
        };
        writer.write_record(&LedgerRecord::RunStart {
            header: RunHeader::from_config(config),
            ts_unix_ms: now_ms(timestamps),
        })?;
        Ok(writer)
    }

    /// Reopen an interrupted run file for appending.
    pub fn append(path: &Path, config: &TunerConfig, timestamps: bool) -> Result<Self> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(LedgerWriter {
            writer: BufWriter::new(file),
            path: path.to_path_buf(),
            seed: config.seed,
            timestamps,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_record(&mut self, record: &LedgerRecord) -> Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Numerical(format!("record serialization failed: {e}")))?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.writer.get_ref().sync_data()?;
        Ok(())
    }

    pub fn write_entry(&mut self, index: usize, entry: &LedgerEntry) -> Result<()> {
        self.write_record(&LedgerRecord::Entry {
            index,
            seed: self.seed,
            dipole_stream: 2 * index as u64,
            suggest_stream: 2 * index as u64 + 1,
            theta: entry.theta.as_array(),
            q_values: entry.q_values.clone(),
            preempted: entry.preempted,
            failed: entry.failed,
            budget_truncated: entry.budget_truncated,
            failure: entry.failure.clone(),
            ts_unix_ms: now_ms(self.timestamps),
        })
    }

    pub fn finish(&mut self, result: &TuningResult) -> Result<()> {
        self.write_record(&LedgerRecord::RunEnd {
            evaluations_used: result.ledger.evaluations_used(),
            distinct_theta: result.distinct_theta,
            best_theta: Some(result.best_theta.as_array()),
            best_mean: Some(result.best_mean),
            ts_unix_ms: now_ms(self.timestamps),
        })
    }
}

/// A parsed run file.
#[derive(Debug, Clone)]
pub struct RunFile {
    pub header: RunHeader,
    pub ledger: Ledger,
    /// Present when the run completed.
    pub completed: Option<(usize, usize, Option<[f64; 5]>, Option<f64>)>,
}

/// Parse and integrity-check a run file: a run-start first, entries with
/// consecutive indices, at most one trailing run-end, and no garbage lines.
pub fn read_run_file(path: &Path) -> Result<RunFile> {
    let file = File::open(path).map_err(|e| {
        Error::ResumeIntegrity(format!("cannot open {}: {e}", path.display()))
    })?;
    let reader = BufReader::new(file);

    let mut header: Option<RunHeader> = None;
    let mut entries: Vec<LedgerEntry> = Vec::new();
    let mut completed = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line =
            line.map_err(|e| Error::ResumeIntegrity(format!("read error at line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            return Err(Error::ResumeIntegrity(format!(
                "blank line {lineno} in {}",
                path.display()
            )));
        }
        let record: LedgerRecord = serde_json::from_str(&line).map_err(|e| {
            Error::ResumeIntegrity(format!("corrupt record at line {lineno}: {e}"))
        })?;
        match record {
            LedgerRecord::RunStart { header: h, .. } => {
                if header.is_some() {
                    return Err(Error::ResumeIntegrity(
                        "duplicate run-start record".into(),
                    ));
                }
                if lineno != 0 {
                    return Err(Error::ResumeIntegrity(
                        "run-start record is not the first line".into(),
                    ));
                }
                header = Some(h);
            }
            LedgerRecord::Entry {
                index,
                theta,
                q_values,
                preempted,
                failed,
                budget_truncated,
                failure,
                ..
            } => {
                if header.is_none() {
                    return Err(Error::ResumeIntegrity(
                        "entry record before run-start".into(),
                    ));
                }
                if completed.is_some() {
                    return Err(Error::ResumeIntegrity("entry record after run-end".into()));
                }
                if index != entries.len() {
                    return Err(Error::ResumeIntegrity(format!(
                        "entry index {index} out of order (expected {})",
                        entries.len()
                    )));
                }
                entries.push(LedgerEntry {
                    theta: ThetaVector::from_array(theta),
                    q_values,
                    preempted,
                    failed,
                    budget_truncated,
                    failure,
                });
            }
            LedgerRecord::RunEnd {
                evaluations_used,
                distinct_theta,
                best_theta,
                best_mean,
                ..
            } => {
                if completed.is_some() {
                    return Err(Error::ResumeIntegrity("duplicate run-end record".into()));
                }
                completed = Some((evaluations_used, distinct_theta, best_theta, best_mean));
            }
        }
    }

    let header = header.ok_or_else(|| {
        Error::ResumeIntegrity(format!("{} has no run-start record", path.display()))
    })?;
    let ledger = Ledger::from(entries);
    if let Some((evals, _, _, _)) = completed {
        if evals != ledger.evaluations_used() {
            return Err(Error::ResumeIntegrity(format!(
                "run-end claims {evals} evaluations but entries sum to {}",
                ledger.evaluations_used()
            )));
        }
    }
    Ok(RunFile {
        header,
        ledger,
        completed,
    })
}

/// Check that a replayed header matches the configuration a resume would
/// continue with.
pub fn check_resume_compatible(header: &RunHeader, config: &TunerConfig) -> Result<()> {
    let expected = RunHeader::from_config(config);
    if *header != expected {
        return Err(Error::ResumeIntegrity(format!(
            "run file header {header:?} does not match the active configuration {expected:?}"
        )));
    }
    Ok(())
}
