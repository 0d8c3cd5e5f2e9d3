//! The sequential tuning loop: suggest a factor vector, score it on a batch
//! of random dipoles, and optionally cut the batch short as soon as its
//! running mean drops below the pooled mean of everything recorded so far.
//!
//! The loop is strictly sequential; independent repetitions run concurrently
//! with separate seeds and ledgers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HeadModel, ThetaBounds, ThetaVector};
use crate::kriging::{self, Observation};
use crate::objective::{Objective, Prepared};
use crate::sampling::{sample_dipole, DipoleRegion, RngStream};
use rand::Rng;

/// Suggestion strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Kriging surrogate with expected-improvement suggestions.
    Sko,
    /// Uniform random search over the bounds.
    Random,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Sko => write!(f, "sko"),
            Strategy::Random => write!(f, "random"),
        }
    }
}

/// Budgets and behaviour of one tuning run.
///
/// `budget` counts quality evaluations (one per dipole solve). Each
/// suggested factor vector is scored on up to `trial_len` dipoles; with
/// preemption enabled a trial may stop after `trial_min` dipoles once the
/// total evaluation count exceeds `warmup`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunerConfig {
    pub budget: usize,
    pub trial_len: usize,
    pub trial_min: usize,
    pub warmup: usize,
    pub bounds: ThetaBounds,
    pub region: DipoleRegion,
    pub strategy: Strategy,
    pub preemptive: bool,
    pub seed: u64,
    /// Include the in-progress trial's values in the pooled mean the
    /// preemption test compares against (off by default: the ledger only
    /// receives a trial after it finishes).
    #[serde(default)]
    pub pooled_include_current: bool,
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(1 <= self.trial_min
            && self.trial_min <= self.trial_len
            && self.trial_len <= self.warmup
            && self.warmup <= self.budget)
        {
            return Err(Error::Config(format!(
                "budgets must satisfy 1 <= trial_min <= trial_len <= warmup <= budget, got \
                 trial_min {} trial_len {} warmup {} budget {}",
                self.trial_min, self.trial_len, self.warmup, self.budget
            )));
        }
        if self.preemptive != (self.trial_min < self.trial_len) {
            return Err(Error::Config(format!(
                "preemptive flag {} inconsistent with trial_min {} vs trial_len {}",
                self.preemptive, self.trial_min, self.trial_len
            )));
        }
        Ok(())
    }

    /// The non-preemptive variant: every trial runs the full length.
    pub fn standard_variant(&self) -> TunerConfig {
        TunerConfig {
            trial_min: self.trial_len,
            preemptive: false,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> TunerConfig {
        TunerConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_strategy(&self, strategy: Strategy) -> TunerConfig {
        TunerConfig {
            strategy,
            ..self.clone()
        }
    }
}

/// One recorded trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEntry {
    pub theta: ThetaVector,
    pub q_values: Vec<f64>,
    pub preempted: bool,
    pub failed: bool,
    pub budget_truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl LedgerEntry {
    pub fn mean(&self) -> f64 {
        if self.q_values.is_empty() {
            f64::NAN
        } else {
            self.q_values.iter().sum::<f64>() / self.q_values.len() as f64
        }
    }

    pub fn variance(&self) -> f64 {
        let n = self.q_values.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.q_values.iter().map(|q| (q - m) * (q - m)).sum::<f64>() / (n - 1) as f64
    }
}

/// The record set of a run: ordered trials plus pooled statistics maintained
/// incrementally.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<LedgerEntry>", into = "Vec<LedgerEntry>")]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    j_used: usize,
    pooled_sum: f64,
    pooled_count: usize,
}

impl From<Vec<LedgerEntry>> for Ledger {
    fn from(entries: Vec<LedgerEntry>) -> Self {
        let mut ledger = Ledger::new();
        for e in entries {
            ledger.push(e);
        }
        ledger
    }
}

impl From<Ledger> for Vec<LedgerEntry> {
    fn from(ledger: Ledger) -> Self {
        ledger.entries
    }
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Quality evaluations consumed so far. Failed trials cost nothing.
    pub fn evaluations_used(&self) -> usize {
        self.j_used
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        if !entry.failed {
            self.j_used += entry.q_values.len();
            self.pooled_sum += entry.q_values.iter().sum::<f64>();
            self.pooled_count += entry.q_values.len();
        }
        self.entries.push(entry);
    }

    /// Mean of every recorded quality value pooled into one sample.
    pub fn pooled_mean(&self) -> Result<f64> {
        if self.pooled_count == 0 {
            return Err(Error::EmptyLedger);
        }
        Ok(self.pooled_sum / self.pooled_count as f64)
    }

    /// Pooled mean with the in-progress values appended.
    pub fn pooled_mean_with(&self, extra: &[f64]) -> Result<f64> {
        let count = self.pooled_count + extra.len();
        if count == 0 {
            return Err(Error::EmptyLedger);
        }
        Ok((self.pooled_sum + extra.iter().sum::<f64>()) / count as f64)
    }

    /// Count of distinct non-failed factor vectors.
    pub fn distinct_theta(&self) -> usize {
        let mut arrays: Vec<[f64; 5]> = self
            .entries
            .iter()
            .filter(|e| !e.failed)
            .map(|e| e.theta.as_array())
            .collect();
        arrays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        arrays.dedup();
        arrays.len()
    }

    pub fn failed_thetas(&self) -> Vec<ThetaVector> {
        self.entries
            .iter()
            .filter(|e| e.failed)
            .map(|e| e.theta)
            .collect()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.entries
            .iter()
            .filter(|e| !e.failed)
            .filter_map(|e| Observation::new(e.theta, e.q_values.clone()).ok())
            .collect()
    }
}

/// Pooled mean of a ledger (error on an empty one).
pub fn pooled_mean(ledger: &Ledger) -> Result<f64> {
    ledger.pooled_mean()
}

/// Best recorded trial: the non-failed entry with the largest mean quality;
/// the earliest entry wins ties.
pub fn best_theta(ledger: &Ledger) -> Result<(ThetaVector, f64)> {
    let mut best: Option<(ThetaVector, f64)> = None;
    for entry in ledger.entries().iter().filter(|e| !e.failed) {
        let m = entry.mean();
        match best {
            Some((_, bm)) if m <= bm => {}
            _ => best = Some((entry.theta, m)),
        }
    }
    best.ok_or_else(|| Error::NoResult("no non-failed trials recorded".into()))
}

/// Outcome of a tuning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningResult {
    pub best_theta: ThetaVector,
    pub best_mean: f64,
    pub distinct_theta: usize,
    pub ledger: Ledger,
}

/// Abort threshold for runs whose every suggestion fails.
const MAX_CONSECUTIVE_FAILURES: usize = 1000;

fn dipole_stream(entry_index: usize) -> u64 {
    2 * entry_index as u64
}

fn suggest_stream(entry_index: usize) -> u64 {
    2 * entry_index as u64 + 1
}

fn uniform_theta(bounds: &ThetaBounds, rng: &mut RngStream) -> ThetaVector {
    let mut a = [0.0; 5];
    for d in 0..5 {
        a[d] = rng.random_range(bounds.lower[d]..bounds.upper[d]);
    }
    ThetaVector::from_array(a)
}

/// Next factor vector to try. Every entry index owns a dedicated random
/// stream, so a resumed run reproduces the suggestions of an uninterrupted
/// one exactly.
fn suggest_theta(config: &TunerConfig, ledger: &Ledger, entry_index: usize) -> ThetaVector {
    let mut rng = RngStream::new(config.seed, suggest_stream(entry_index));
    match config.strategy {
        Strategy::Random => uniform_theta(&config.bounds, &mut rng),
        Strategy::Sko => match kriging::fit(&ledger.observations(), &config.bounds, &mut rng) {
            Ok(model) => model.suggest(&ledger.failed_thetas(), &mut rng),
            // Too little data or a numerically hostile fit: explore.
            Err(_) => uniform_theta(&config.bounds, &mut rng),
        },
    }
}

/// Run the tuning loop from an empty ledger.
pub fn run<O, S>(
    config: &TunerConfig,
    head: &HeadModel,
    objective: &mut O,
    sink: &mut S,
) -> Result<TuningResult>
where
    O: Objective,
    S: FnMut(usize, &LedgerEntry) -> Result<()>,
{
    resume(config, head, objective, Ledger::new(), sink)
}

/// Continue the tuning loop from a replayed ledger, spending only the
/// remaining budget.
pub fn resume<O, S>(
    config: &TunerConfig,
    head: &HeadModel,
    objective: &mut O,
    mut ledger: Ledger,
    sink: &mut S,
) -> Result<TuningResult>
where
    O: Objective,
    S: FnMut(usize, &LedgerEntry) -> Result<()>,
{
    config.validate()?;
    let mut consecutive_failures = 0usize;

    while ledger.evaluations_used() < config.budget {
        let entry_index = ledger.entries().len();
        let theta = suggest_theta(config, &ledger, entry_index);

        let state = match objective.prepare(&theta)? {
            Prepared::Ready(state) => {
                consecutive_failures = 0;
                state
            }
            Prepared::Failed(reason) => {
                let entry = LedgerEntry {
                    theta,
                    q_values: Vec::new(),
                    preempted: false,
                    failed: true,
                    budget_truncated: false,
                    failure: Some(reason.to_string()),
                };
                ledger.push(entry);
                sink(entry_index, ledger.entries().last().unwrap())?;
                consecutive_failures += 1;
                if consecutive_failures >= MAX_CONSECUTIVE_FAILURES {
                    return Err(Error::NoResult(format!(
                        "{MAX_CONSECUTIVE_FAILURES} consecutive failed suggestions"
                    )));
                }
                continue;
            }
        };

        let mut dipole_rng = RngStream::new(config.seed, dipole_stream(entry_index));
        let mut q_values: Vec<f64> = Vec::with_capacity(config.trial_len);
        let mut preempted = false;
        let mut budget_truncated = false;

        for _ in 0..config.trial_len {
            if ledger.evaluations_used() + q_values.len() >= config.budget {
                budget_truncated = true;
                break;
            }
            let dipole = sample_dipole(&config.region, head, &mut dipole_rng)?;
            let q = objective.evaluate(&state, &dipole)?;
            q_values.push(q);

            // Preemption test: enough dipoles in this trial, past the warmup
            // budget, and the running mean strictly below the pooled mean.
            let evaluations_now = ledger.evaluations_used() + q_values.len();
            if config.preemptive
                && q_values.len() >= config.trial_min
                && q_values.len() < config.trial_len
                && evaluations_now > config.warmup
            {
                let pooled = if config.pooled_include_current {
                    ledger.pooled_mean_with(&q_values)?
                } else {
                    ledger.pooled_mean()?
                };
                let running = q_values.iter().sum::<f64>() / q_values.len() as f64;
                if running < pooled {
                    preempted = true;
                    break;
                }
            }
        }

        let entry = LedgerEntry {
            theta,
            q_values,
            preempted,
            failed: false,
            budget_truncated,
            failure: None,
        };
        ledger.push(entry);
        sink(entry_index, ledger.entries().last().unwrap())?;
    }

    let (best, best_mean) = best_theta(&ledger)?;
    Ok(TuningResult {
        best_theta: best,
        best_mean,
        distinct_theta: ledger.distinct_theta(),
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::synthetic::{ScriptedMeans, SmoothPeak};
    use crate::sampling::{catalog_region, RegionKind};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn head() -> HeadModel {
        HeadModel::default()
    }

    fn whole_brain() -> DipoleRegion {
        DipoleRegion::new("whole", RegionKind::WholeBrain)
    }

    fn entry(values: &[f64]) -> LedgerEntry {
        LedgerEntry {
            theta: ThetaVector::new(1.5, 0.7, 1.3, 0.6, 1.4),
            q_values: values.to_vec(),
            preempted: false,
            failed: false,
            budget_truncated: false,
            failure: None,
        }
    }

    fn reference_config() -> TunerConfig {
        TunerConfig {
            budget: 800,
            trial_len: 30,
            trial_min: 5,
            warmup: 150,
            bounds: ThetaBounds::default(),
            region: whole_brain(),
            strategy: Strategy::Random,
            preemptive: true,
            seed: 7,
            pooled_include_current: false,
        }
    }

    #[test]
    fn pooled_mean_concatenates_all_values() {
        let mut ledger = Ledger::new();
        ledger.push(entry(&[1.0, 2.0, 3.0]));
        ledger.push(entry(&[4.0, 5.0, 6.0]));
        assert_eq!(pooled_mean(&ledger).unwrap(), 3.5);

        let mut single = Ledger::new();
        single.push(entry(&[5.0]));
        assert_eq!(pooled_mean(&single).unwrap(), 5.0);

        let mut uneven = Ledger::new();
        uneven.push(entry(&[1.0, 2.0]));
        uneven.push(entry(&[3.0]));
        assert_eq!(pooled_mean(&uneven).unwrap(), 2.0);

        assert!(matches!(
            pooled_mean(&Ledger::new()),
            Err(Error::EmptyLedger)
        ));
    }

    #[test]
    fn always_preempting_runs_maximize_distinct_vectors() {
        // Strictly decreasing per-vector means: after the warmup budget every
        // trial is cut at trial_min, giving warmup/trial_len +
        // (budget-warmup)/trial_min = 5 + 130 = 135 distinct vectors.
        let config = reference_config();
        let mut objective = ScriptedMeans::decreasing(1000.0, 1.0);
        let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();

        assert_eq!(result.distinct_theta, 135);
        assert_eq!(result.ledger.evaluations_used(), 800);
        for (i, e) in result.ledger.entries().iter().enumerate() {
            if i < 5 {
                assert_eq!(e.q_values.len(), 30);
                assert!(!e.preempted);
            } else {
                assert_eq!(e.q_values.len(), 5);
                assert!(e.preempted);
            }
        }
    }

    #[test]
    fn never_preempting_runs_minimize_distinct_vectors() {
        // Strictly increasing means: no trial is ever preempted, so the
        // budget packs floor(800/30) full trials plus one truncated one.
        let config = reference_config();
        let mut objective = ScriptedMeans::increasing(0.0, 1.0);
        let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();

        assert_eq!(result.distinct_theta, 27);
        assert_eq!(result.ledger.evaluations_used(), 800);
        let entries = result.ledger.entries();
        assert_eq!(entries.len(), 27);
        for e in &entries[..26] {
            assert_eq!(e.q_values.len(), 30);
            assert!(!e.preempted && !e.budget_truncated);
        }
        let last = &entries[26];
        assert_eq!(last.q_values.len(), 20);
        assert!(last.budget_truncated);
        assert!(!last.preempted);
    }

    #[test]
    fn non_preemptive_runs_have_fixed_trial_sizes() {
        let config = TunerConfig {
            preemptive: false,
            trial_min: 30,
            ..reference_config()
        };
        let mut objective = ScriptedMeans::decreasing(1000.0, 1.0);
        let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();
        assert_eq!(result.ledger.entries().len(), 800 / 30 + 1);
        assert_eq!(result.distinct_theta, 27);
        for e in result.ledger.entries().iter().take(26) {
            assert_eq!(e.q_values.len(), 30);
        }
    }

    #[test]
    fn preemption_respects_warmup_and_minimum_trial_sizes() {
        let config = reference_config();
        let mut objective = ScriptedMeans::decreasing(1000.0, 1.0);
        let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();
        // Replay the budget clock over the ledger and check every preempted
        // entry fired legally.
        let mut j = 0usize;
        for e in result.ledger.entries() {
            j += e.q_values.len();
            if e.preempted {
                assert!(e.q_values.len() >= config.trial_min);
                assert!(e.q_values.len() < config.trial_len);
                assert!(j > config.warmup);
            }
        }
    }

    #[test]
    fn failed_suggestions_cost_no_budget() {
        let config = TunerConfig {
            budget: 90,
            trial_len: 30,
            trial_min: 30,
            warmup: 30,
            preemptive: false,
            ..reference_config()
        };
        let mut objective = ScriptedMeans::increasing(0.0, 1.0);
        objective.fail_every = Some(2);
        let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();
        let failed = result.ledger.entries().iter().filter(|e| e.failed).count();
        let ok = result.ledger.entries().iter().filter(|e| !e.failed).count();
        assert_eq!(ok, 3);
        assert_eq!(failed, 2);
        assert_eq!(result.ledger.evaluations_used(), 90);
        for e in result.ledger.entries().iter().filter(|e| e.failed) {
            assert!(e.q_values.is_empty());
            assert!(e.failure.is_some());
        }
    }

    #[test]
    fn best_theta_prefers_the_earliest_tied_entry() {
        let mut ledger = Ledger::new();
        let mut e1 = entry(&[1.0]);
        e1.theta = ThetaVector::new(1.2, 0.5, 1.2, 0.5, 1.2);
        let mut e2 = entry(&[3.2]);
        e2.theta = ThetaVector::new(1.3, 0.5, 1.2, 0.5, 1.2);
        let mut e3 = entry(&[2.1]);
        e3.theta = ThetaVector::new(1.4, 0.5, 1.2, 0.5, 1.2);
        let mut e4 = entry(&[3.2]);
        e4.theta = ThetaVector::new(1.5, 0.5, 1.2, 0.5, 1.2);
        ledger.push(e1);
        ledger.push(e2.clone());
        ledger.push(e3);
        ledger.push(e4);
        let (theta, mean) = best_theta(&ledger).unwrap();
        assert_eq!(mean, 3.2);
        assert_eq!(theta.as_array(), e2.theta.as_array());
    }

    #[test]
    fn fixed_seeds_reproduce_ledgers_byte_for_byte() {
        let config = TunerConfig {
            budget: 60,
            trial_len: 6,
            trial_min: 2,
            warmup: 12,
            strategy: Strategy::Sko,
            region: catalog_region(1).unwrap(),
            ..reference_config()
        };
        let run_once = || {
            let mut objective = SmoothPeak {
                bounds: ThetaBounds::default(),
                peak: [0.3, 0.7, 0.5, 0.4, 0.6],
                baseline: 1.0,
                amplitude: 3.0,
                width: 0.3,
                noise_sigma: 0.5,
            };
            let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();
            serde_json::to_vec(&result.ledger).unwrap()
        };
        assert_eq!(run_once(), run_once());
    }

    #[test]
    fn resume_continues_exactly_where_the_run_stopped() {
        let config = TunerConfig {
            budget: 60,
            trial_len: 6,
            trial_min: 2,
            warmup: 12,
            strategy: Strategy::Sko,
            ..reference_config()
        };
        let fresh_objective = || SmoothPeak {
            bounds: ThetaBounds::default(),
            peak: [0.3, 0.7, 0.5, 0.4, 0.6],
            baseline: 1.0,
            amplitude: 3.0,
            width: 0.3,
            noise_sigma: 0.5,
        };
        let full = run(&config, &head(), &mut fresh_objective(), &mut |_, _| Ok(()))
            .unwrap();
        for cut in [1usize, 3] {
            let partial = Ledger::from(full.ledger.entries()[..cut].to_vec());
            let resumed = resume(
                &config,
                &head(),
                &mut fresh_objective(),
                partial,
                &mut |_, _| Ok(()),
            )
            .unwrap();
            assert_eq!(
                serde_json::to_vec(&resumed.ledger).unwrap(),
                serde_json::to_vec(&full.ledger).unwrap(),
                "cut after {cut} entries"
            );
        }
    }

    #[test]
    fn preemptive_sko_runs_record_partial_trials_for_the_surrogate() {
        let config = TunerConfig {
            budget: 120,
            trial_len: 10,
            trial_min: 3,
            warmup: 30,
            strategy: Strategy::Sko,
            ..reference_config()
        };
        let mut objective = SmoothPeak {
            bounds: ThetaBounds::default(),
            peak: [0.3, 0.7, 0.5, 0.4, 0.6],
            baseline: 1.0,
            amplitude: 3.0,
            width: 0.25,
            noise_sigma: 0.8,
        };
        let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();
        assert!(result.ledger.evaluations_used() <= config.budget);
        // Partial trials still appear as observations.
        let obs = result.ledger.observations();
        assert_eq!(
            obs.len(),
            result.ledger.entries().iter().filter(|e| !e.failed).count()
        );
        assert!(result.best_mean.is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn budget_and_ledger_invariants_hold(
            seed in 0u64..1000,
            trial_len in 2usize..8,
            trial_min in 1usize..4,
            budget_mult in 2usize..6,
            start in -5.0..5.0f64,
            step in -1.0..1.0f64,
        ) {
            let trial_min = trial_min.min(trial_len);
            let warmup = trial_len * 2;
            let budget = warmup * budget_mult;
            let config = TunerConfig {
                budget,
                trial_len,
                trial_min,
                warmup,
                bounds: ThetaBounds::default(),
                region: whole_brain(),
                strategy: Strategy::Random,
                preemptive: trial_min < trial_len,
                seed,
                pooled_include_current: false,
            };
            let mut objective = ScriptedMeans::increasing(start, 0.0);
            objective.step = step;
            let result = run(&config, &head(), &mut objective, &mut |_, _| Ok(())).unwrap();

            // Budget conservation.
            let total: usize = result.ledger.entries().iter().map(|e| e.q_values.len()).sum();
            prop_assert_eq!(total, result.ledger.evaluations_used());
            prop_assert!(result.ledger.evaluations_used() <= budget);

            // Entry-size bounds and flag consistency.
            for e in result.ledger.entries() {
                prop_assert!(e.q_values.len() <= trial_len);
                if !e.failed && !e.preempted && !e.budget_truncated {
                    prop_assert_eq!(e.q_values.len(), trial_len);
                }
                if e.preempted {
                    prop_assert!(e.q_values.len() >= trial_min);
                }
            }

            // Incremental pooled statistics equal a from-scratch recompute.
            let scratch: Vec<f64> = result
                .ledger
                .entries()
                .iter()
                .filter(|e| !e.failed)
                .flat_map(|e| e.q_values.iter().cloned())
                .collect();
            if !scratch.is_empty() {
                let scratch_mean = scratch.iter().sum::<f64>() / scratch.len() as f64;
                prop_assert!((result.ledger.pooled_mean().unwrap() - scratch_mean).abs() < 1e-12);
            }
        }
    }
}
