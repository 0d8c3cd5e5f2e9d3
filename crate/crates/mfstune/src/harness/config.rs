//! Experiment configuration: one JSON-serializable struct covering the head
//! model, solver sizing, metric options, tuning budgets, and repetition
//! control. Unknown keys are fatal; a config file round-trips exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CenterCounts, HeadModel, ThetaBounds, EPSILON_GEOM};
use crate::mfs::{LogBase, MetricOptions, MfsConfig};
use crate::oracle::OracleConfig;
use crate::sampling::{catalog_region, DipoleRegion};
use crate::tuner::{Strategy, TunerConfig};

/// Region selection: a 1-based catalog index or an inline definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionChoice {
    Index(usize),
    Inline(DipoleRegion),
}

impl RegionChoice {
    pub fn resolve(&self) -> Result<DipoleRegion> {
        match self {
            RegionChoice::Index(i) => catalog_region(*i),
            RegionChoice::Inline(region) => Ok(region.clone()),
        }
    }
}

/// Named base profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Full-size reference configuration (long runs).
    Paper,
    /// Desk-scale configuration for interactive use.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected 'paper' or 'desk')"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub head: HeadModel,

    /// Collocation points per physical sphere.
    pub n_colloc: usize,
    /// Kernel centers per fictitious sphere.
    pub counts: CenterCounts,
    /// Scalp test points the quality metric is evaluated on.
    pub test_points: usize,

    pub bounds: ThetaBounds,

    /// Total quality-evaluation budget of one tuning run.
    pub budget: usize,
    /// Dipoles per suggested factor vector.
    pub trial_len: usize,
    /// Minimum dipoles before a trial may be preempted.
    pub trial_min: usize,
    /// Evaluations during which preemption is disabled.
    pub warmup: usize,

    pub strategy: Strategy,
    pub preemptive: bool,
    pub seed: u64,
    pub pooled_include_current: bool,

    pub region: RegionChoice,

    pub oracle_tol: f64,
    pub oracle_max_degree: usize,

    pub log_base: LogBase,
    pub common_average_reference: bool,
    pub q_cap: f64,

    pub tau_svd: f64,
    /// Relative numerical-rank threshold; `None` means machine epsilon
    /// times max(rows, cols).
    pub tau_rank: Option<f64>,
    pub flux_row_scaling: bool,
    pub eps_geom: f64,

    /// Paired repetitions per arm for comparisons.
    pub repetitions: usize,
    /// Record wall-clock timestamps in persisted ledgers. Off by default so
    /// that fixed-seed runs emit byte-identical files.
    pub record_timestamps: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::desk()
    }
}

impl ExperimentConfig {
    /// Desk-scale profile: small enough to iterate with on a laptop.
    pub fn desk() -> Self {
        ExperimentConfig {
            head: HeadModel::default(),
            n_colloc: 150,
            counts: CenterCounts::default(),
            test_points: 200,
            bounds: ThetaBounds::default(),
            budget: 200,
            trial_len: 10,
            trial_min: 3,
            warmup: 50,
            strategy: Strategy::Sko,
            preemptive: true,
            seed: 1729,
            pooled_include_current: false,
            region: RegionChoice::Index(1),
            oracle_tol: 1e-10,
            oracle_max_degree: 400,
            log_base: LogBase::Natural,
            common_average_reference: false,
            q_cap: 40.0,
            tau_svd: 1e-12,
            tau_rank: None,
            flux_row_scaling: true,
            eps_geom: EPSILON_GEOM,
            repetitions: 10,
        record_timestamps: false,
        }
    }

    /// Full-size reference profile: 300 collocation points per sphere,
    /// 1000 test points, 800-evaluation budget with 30-dipole trials.
    pub fn paper() -> Self {
        ExperimentConfig {
            n_colloc: 300,
            test_points: 1000,
            budget: 800,
            trial_len: 30,
            trial_min: 5,
            warmup: 150,
            repetitions: 30,
            ..ExperimentConfig::desk()
        }
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => ExperimentConfig::paper(),
            Preset::Desk => ExperimentConfig::desk(),
        }
    }

    /// Load a config: start from the preset, overlay the file's keys (deep
    /// merge), reject unknown keys, and validate.
    pub fn load(preset: Preset, path: Option<&Path>) -> Result<Self> {
        let base = ExperimentConfig::preset(preset);
        let config = match path {
            None => base,
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                let overlay: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
                let mut merged = serde_json::to_value(&base)
                    .map_err(|e| Error::Config(format!("config encode error: {e}")))?;
                merge_json(&mut merged, overlay);
                serde_json::from_value(merged)
                    .map_err(|e| Error::Config(format!("config error: {e}")))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.head.validate()?;
        self.bounds.validate()?;
        self.counts.validate()?;
        if self.n_colloc == 0 {
            return Err(Error::Config("n_colloc must be positive".into()));
        }
        if self.test_points < 2 {
            return Err(Error::Config("test_points must be at least 2".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if !(self.oracle_tol > 0.0) {
            return Err(Error::Config("oracle_tol must be positive".into()));
        }
        self.region.resolve()?;
        // Cross-check the tuner invariants through the same path the run
        // will use.
        self.tuner_config()?.validate()
    }

    pub fn mfs_config(&self) -> MfsConfig {
        MfsConfig {
            n_colloc: self.n_colloc,
            counts: self.counts,
            flux_row_scaling: self.flux_row_scaling,
            tau_svd: self.tau_svd,
            tau_rank: self.tau_rank,
            eps_geom: self.eps_geom,
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            tol: self.oracle_tol,
            max_degree: self.oracle_max_degree,
            fixed_degree: None,
        }
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            log_base: self.log_base,
            common_average_reference: self.common_average_reference,
            q_cap: self.q_cap,
        }
    }

    pub fn tuner_config(&self) -> Result<TunerConfig> {
        Ok(TunerConfig {
            budget: self.budget,
            trial_len: self.trial_len,
            trial_min: self.trial_min,
            warmup: self.warmup,
            bounds: self.bounds,
            region: self.region.resolve()?,
            strategy: self.strategy,
            preemptive: self.preemptive,
            seed: self.seed,
            pooled_include_current: self.pooled_include_current,
        })
    }
}

/// Recursive JSON merge: object keys from `overlay` replace or descend into
/// `base`; everything else replaces wholesale.
fn merge_json(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        // Unknown key: keep it so the typed parse rejects it.
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
