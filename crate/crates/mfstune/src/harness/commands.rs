//! The operations behind the CLI subcommands. Each returns a typed report;
//! printing and exit codes stay in the binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{spiral_points, ThetaVector};
use crate::harness::config::ExperimentConfig;
use crate::harness::persist::{
    check_resume_compatible, read_run_file, LedgerWriter, RunHeader,
};
use crate::kriging::expected_improvement_value;
use crate::mfs::{assemble, factorize, quality_q};
use crate::objective::MfsObjective;
use crate::oracle::{
    homogeneous_reference, layered_potential, layered_potential_detailed, Dipole, OracleConfig,
};
use crate::sampling::{sample_dipole, DipoleRegion, RegionKind, RngStream};
use crate::stats::{compare_strategies, median, ComparisonReport};
use crate::tuner::{self, Strategy, TunerConfig, TuningResult};
use crate::vec3::norm;

/// Outcome of a single forward solve scored against the analytic reference.
#[derive(Debug, Clone, Serialize)]
pub struct ForwardReport {
    pub theta: [f64; 5],
    pub dipole_position: [f64; 3],
    pub dipole_moment: [f64; 3],
    pub quality: f64,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub rank: usize,
    pub columns: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub elapsed_ms: u128,
}

impl std::fmt::Display for ForwardReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "theta            {:?}", self.theta)?;
        writeln!(
            f,
            "dipole           position {:?} moment {:?}",
            self.dipole_position, self.dipole_moment
        )?;
        writeln!(f, "quality Q        {:.4}", self.quality)?;
        writeln!(
            f,
            "residual         {:.3e} (rhs norm {:.3e})",
            self.residual_norm, self.rhs_norm
        )?;
        writeln!(
            f,
            "numerical rank   {}/{} (sigma {:.3e} .. {:.3e})",
            self.rank, self.columns, self.sigma_min, self.sigma_max
        )?;
        write!(f, "elapsed          {} ms", self.elapsed_ms)
    }
}

/// One forward solve + quality score.
pub fn run_forward(
    config: &ExperimentConfig,
    theta: &ThetaVector,
    dipole: &Dipole,
) -> Result<ForwardReport> {
    config.validate()?;
    config.bounds.check(theta)?;
    faer::set_global_parallelism(faer::Par::Seq);

    let start = Instant::now();
    let mfs_cfg = config.mfs_config();
    let solver = factorize(assemble(theta, &config.head, &mfs_cfg)?, &mfs_cfg)?;
    let solution = solver.solve(dipole)?;
    let test = spiral_points(config.test_points, config.head.r_scalp)?;
    let u_mfs = solver.evaluate_scalp(&solution, &test)?;
    let u_true = layered_potential(&config.head, dipole, &test, &config.oracle_config())?;
    let quality = quality_q(&u_mfs, &u_true, &config.metric_options())?;

    Ok(ForwardReport {
        theta: theta.as_array(),
        dipole_position: dipole.position,
        dipole_moment: dipole.moment,
        quality: quality.0,
        residual_norm: solution.residual_norm,
        rhs_norm: solution.rhs_norm,
        rank: solution.rank,
        columns: solver.system().ncols(),
        sigma_max: solution.sigma_max,
        sigma_min: solution.sigma_min,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheckReport {
    pub checks: Vec<CheckResult>,
}

impl OracleCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for OracleCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<24} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        write!(
            f,
            "oracle self-consistency: {}",
            if self.passed() { "ok" } else { "FAILED" }
        )
    }
}

/// Agreement threshold for the truncation-stability check: doubling the
/// series length must not move any value by more than this relative amount.
const ORACLE_STABILITY_REL: f64 = 1e-10;

/// Oracle self-consistency suite: homogeneous reduction, linearity,
/// axisymmetry, truncation stability.
pub fn run_oracle_check(config: &ExperimentConfig) -> Result<OracleCheckReport> {
    config.validate()?;
    let head = config.head;
    let oracle_cfg = config.oracle_config();
    let eval = spiral_points(200, head.r_scalp)?;
    let mut rng = RngStream::new(config.seed, 0);
    let region = DipoleRegion::new(
        "oracle-check",
        RegionKind::Ball {
            center: [0.0, 0.0, 0.0],
            radius: 0.8 * head.r_brain,
        },
    );
    let mut checks = Vec::new();

    // Uniform conductivity must collapse onto the single-sphere reference.
    {
        let sigma = head.sigma_brain;
        let uniform = head.with_uniform_conductivity(sigma);
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let dipole = sample_dipole(&region, &head, &mut rng)?;
            let lay = layered_potential(&uniform, &dipole, &eval, &oracle_cfg)?;
            let hom = homogeneous_reference(sigma, head.r_scalp, &dipole, &eval)?;
            let num: f64 = lay
                .values
                .iter()
                .zip(&hom.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let den: f64 = hom.values.iter().map(|v| v * v).sum();
            worst = worst.max((num / den).sqrt());
        }
        checks.push(CheckResult {
            name: "homogeneous-reduction".into(),
            passed: worst < 1e-8,
            detail: format!("worst relative error {worst:.3e} (limit 1e-8)"),
        });
    }

    // Linearity in the moment.
    {
        let position = [0.01, -0.015, 0.02];
        let q1 = [0.7, 0.1, -0.4];
        let q2 = [-0.2, 0.8, 0.3];
        let (alpha, beta) = (1.3, -0.7);
        let f1 = layered_potential(&head, &Dipole::new(position, q1), &eval, &oracle_cfg)?;
        let f2 = layered_potential(&head, &Dipole::new(position, q2), &eval, &oracle_cfg)?;
        let q = [
            alpha * q1[0] + beta * q2[0],
            alpha * q1[1] + beta * q2[1],
            alpha * q1[2] + beta * q2[2],
        ];
        let f = layered_potential(&head, &Dipole::new(position, q), &eval, &oracle_cfg)?;
        let scale = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = f
            .values
            .iter()
            .zip(f1.values.iter().zip(&f2.values))
            .map(|(v, (a, b))| (v - (alpha * a + beta * b)).abs())
            .fold(0.0f64, f64::max)
            / scale;
        checks.push(CheckResult {
            name: "linearity".into(),
            passed: worst < 1e-9,
            detail: format!("worst relative deviation {worst:.3e} (limit 1e-9)"),
        });
    }

    // Axisymmetry of an axial dipole.
    {
        let dipole = Dipole::new([0.0, 0.0, 0.05], [0.0, 0.0, 1.0]);
        let polar = 0.9f64;
        let ring: Vec<[f64; 3]> = (0..24)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / 24.0;
                [
                    head.r_scalp * polar.sin() * phi.cos(),
                    head.r_scalp * polar.sin() * phi.sin(),
                    head.r_scalp * polar.cos(),
                ]
            })
            .collect();
        let ring = crate::geometry::PointSet {
            points: ring,
            radius: head.r_scalp,
        };
        let f = layered_potential(&head, &dipole, &ring, &oracle_cfg)?;
        let scale = f.values[0].abs().max(1e-300);
        let spread = f
            .values
            .iter()
            .map(|v| (v - f.values[0]).abs())
            .fold(0.0f64, f64::max)
            / scale;
        checks.push(CheckResult {
            name: "axisymmetry".into(),
            passed: spread < 1e-9,
            detail: format!("ring spread {spread:.3e} (limit 1e-9)"),
        });
    }

    // Stability under doubling the truncation degree.
    {
        let dipole = Dipole::new([0.02, 0.01, 0.05], [0.4, -0.3, 0.86]);
        let (f, used) = layered_potential_detailed(&head, &dipole, &eval, &oracle_cfg)?;
        let doubled_cfg = OracleConfig {
            fixed_degree: Some(2 * used),
            ..oracle_cfg
        };
        let f2 = layered_potential(&head, &dipole, &eval, &doubled_cfg)?;
        let scale = f2.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = f
            .values
            .iter()
            .zip(&f2.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            / scale;
        checks.push(CheckResult {
            name: "truncation-stability".into(),
            passed: change < ORACLE_STABILITY_REL,
            detail: format!(
                "doubling {used} -> {} degrees moved values by {change:.3e} (limit {ORACLE_STABILITY_REL:.0e})",
                2 * used
            ),
        });
    }

    Ok(OracleCheckReport { checks })
}

/// Summary of one tuning run.
#[derive(Debug, Clone, Serialize)]
pub struct TuneSummary {
    pub strategy: Strategy,
    pub preemptive: bool,
    pub seed: u64,
    pub best_theta: [f64; 5],
    pub best_mean: f64,
    pub distinct_theta: usize,
    pub entries: usize,
    pub failed_entries: usize,
    pub evaluations_used: usize,
    pub ledger_path: PathBuf,
    pub elapsed_ms: u128,
}

impl std::fmt::Display for TuneSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "strategy         {} ({})",
            self.strategy,
            if self.preemptive { "preemptive" } else { "standard" }
        )?;
        writeln!(f, "seed             {}", self.seed)?;
        writeln!(f, "best mean Q      {:.4}", self.best_mean)?;
        writeln!(f, "best theta       {:?}", self.best_theta)?;
        writeln!(
            f,
            "trials           {} recorded ({} failed), {} distinct vectors",
            self.entries, self.failed_entries, self.distinct_theta
        )?;
        writeln!(f, "evaluations      {}", self.evaluations_used)?;
        writeln!(f, "ledger           {}", self.ledger_path.display())?;
        write!(f, "elapsed          {} ms", self.elapsed_ms)
    }
}

fn summarize(
    config: &TunerConfig,
    result: &TuningResult,
    path: &Path,
    elapsed_ms: u128,
) -> TuneSummary {
    TuneSummary {
        strategy: config.strategy,
        preemptive: config.preemptive,
        seed: config.seed,
        best_theta: result.best_theta.as_array(),
        best_mean: result.best_mean,
        distinct_theta: result.distinct_theta,
        entries: result.ledger.entries().len(),
        failed_entries: result
            .ledger
            .entries()
            .iter()
            .filter(|e| e.failed)
            .count(),
        evaluations_used: result.ledger.evaluations_used(),
        ledger_path: path.to_path_buf(),
        elapsed_ms,
    }
}

fn ledger_file_name(config: &TunerConfig) -> String {
    format!(
        "run_{}_{}_seed{:05}.ndjson",
        config.strategy,
        if config.preemptive { "preemptive" } else { "standard" },
        config.seed
    )
}

fn mfs_objective(config: &ExperimentConfig) -> Result<MfsObjective> {
    MfsObjective::new(
        config.head,
        config.mfs_config(),
        config.test_points,
        config.oracle_config(),
        config.metric_options(),
    )
}

/// One tuning run against the MFS stack, persisting the ledger record by
/// record under `out_dir`.
pub fn run_tune(config: &ExperimentConfig, out_dir: &Path) -> Result<TuneSummary> {
    config.validate()?;
    let tuner_cfg = config.tuner_config()?;
    let path = out_dir.join(ledger_file_name(&tuner_cfg));
    let start = Instant::now();
    let mut objective = mfs_objective(config)?;
    let mut writer = LedgerWriter::create(&path, &tuner_cfg, config.record_timestamps)?;
    let result = tuner::run(&tuner_cfg, &config.head, &mut objective, &mut |i, e| {
        writer.write_entry(i, e)
    })?;
    writer.finish(&result)?;
    Ok(summarize(&tuner_cfg, &result, &path, start.elapsed().as_millis()))
}

/// Resume an interrupted tuning run from its ledger file and spend the
/// remaining budget.
pub fn run_tune_resume(config: &ExperimentConfig, ledger_path: &Path) -> Result<TuneSummary> {
    config.validate()?;
    let tuner_cfg = config.tuner_config()?;
    let start = Instant::now();
    let run_file = read_run_file(ledger_path)?;
    check_resume_compatible(&run_file.header, &tuner_cfg)?;
    if run_file.completed.is_some() {
        return Err(Error::ResumeIntegrity(format!(
            "{} already holds a completed run",
            ledger_path.display()
        )));
    }
    let mut objective = mfs_objective(config)?;
    let mut writer = LedgerWriter::append(ledger_path, &tuner_cfg, config.record_timestamps)?;
    let result = tuner::resume(
        &tuner_cfg,
        &config.head,
        &mut objective,
        run_file.ledger,
        &mut |i, e| writer.write_entry(i, e),
    )?;
    writer.finish(&result)?;
    Ok(summarize(
        &tuner_cfg,
        &result,
        ledger_path,
        start.elapsed().as_millis(),
    ))
}

/// The four comparison arms.
fn arms(base: &TunerConfig) -> Vec<TunerConfig> {
    let sko = base.with_strategy(Strategy::Sko);
    let random = base.with_strategy(Strategy::Random);
    vec![
        sko.standard_variant(),
        sko.clone(),
        random.standard_variant(),
        random,
    ]
}

/// Median/bonus/significance table in the shape of the reference results:
/// one row per region, strategy families side by side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareTable {
    pub region: String,
    pub repetitions: usize,
    pub sko: ComparisonReport,
    pub random: ComparisonReport,
    /// Cross-family check: kriging-standard against random-standard.
    pub sko_vs_random_p: f64,
}

impl CompareTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,strategy,median_q,bonus,p_value,significant\n");
        let sig = |s: &Option<bool>| match s {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        out.push_str(&format!(
            "{},sko_standard,{:.6},,,\n",
            self.region, self.sko.median_standard
        ));
        out.push_str(&format!(
            "{},sko_preemptive,{:.6},{},{:.6},{}\n",
            self.region,
            self.sko.median_preemptive,
            self.sko.bonus,
            self.sko.p_value,
            sig(&self.sko.significant)
        ));
        out.push_str(&format!(
            "{},random_standard,{:.6},,,\n",
            self.region, self.random.median_standard
        ));
        out.push_str(&format!(
            "{},random_preemptive,{:.6},{},{:.6},{}\n",
            self.region,
            self.random.median_preemptive,
            self.random.bonus,
            self.random.p_value,
            sig(&self.random.significant)
        ));
        out
    }

    pub fn to_text(&self) -> String {
        let mark = |r: &ComparisonReport| match r.significant {
            Some(true) => "*",
            Some(false) => " ",
            None => "?",
        };
        let mut out = String::new();
        out.push_str(&format!(
            "region {} | {} repetitions per arm (paired seeds)\n",
            self.region, self.repetitions
        ));
        out.push_str(
            "            |      kriging (sko)       |       random search\n",
        );
        out.push_str(
            "            | standard preempt.  bonus | standard preempt.  bonus\n",
        );
        out.push_str(&format!(
            "median Q    | {:8.3} {:7.3}{} {:6.1} | {:8.3} {:7.3}{} {:6.1}\n",
            self.sko.median_standard,
            self.sko.median_preemptive,
            mark(&self.sko),
            self.sko.bonus,
            self.random.median_standard,
            self.random.median_preemptive,
            mark(&self.random),
            self.random.bonus,
        ));
        out.push_str(&format!(
            "p-values    | preemptive vs standard: sko {:.4}, random {:.4}; sko vs random (standard): {:.4}\n",
            self.sko.p_value, self.random.p_value, self.sko_vs_random_p
        ));
        out.push_str("(* marks p < 0.05; ? means too few repetitions)\n");
        out
    }
}

/// Thread count for parallel repetitions: the `MFSTUNE_THREADS` variable,
/// defaulting to the machine's available parallelism.
pub fn thread_count() -> usize {
    std::env::var("MFSTUNE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Run all four arms with paired seeds, persist every ledger, and emit the
/// comparison table (JSON + CSV + aligned text) under `out_dir`.
pub fn run_compare(config: &ExperimentConfig, out_dir: &Path) -> Result<CompareTable> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let base = config.tuner_config()?;
    let arm_configs = arms(&base);

    // (arm index, repetition) tasks; each runs with seed = base seed + rep.
    let mut tasks: Vec<(usize, TunerConfig)> = Vec::new();
    for (a, arm) in arm_configs.iter().enumerate() {
        for rep in 0..config.repetitions {
            tasks.push((a, arm.with_seed(base.seed + rep as u64)));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;

    let results: Vec<Result<(usize, u64, TuningResult)>> = pool.install(|| {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(|(a, run_cfg)| {
                let path = out_dir.join(ledger_file_name(run_cfg));
                let mut objective = mfs_objective(config)?;
                let mut writer =
                    LedgerWriter::create(&path, run_cfg, config.record_timestamps)?;
                let result =
                    tuner::run(run_cfg, &config.head, &mut objective, &mut |i, e| {
                        writer.write_entry(i, e)
                    })?;
                writer.finish(&result)?;
                Ok((*a, run_cfg.seed, result))
            })
            .collect()
    });

    let mut grouped: Vec<BTreeMap<u64, TuningResult>> = vec![BTreeMap::new(); 4];
    for r in results {
        let (a, seed, result) = r?;
        grouped[a].insert(seed, result);
    }
    let by_arm: Vec<Vec<TuningResult>> = grouped
        .into_iter()
        .map(|m| m.into_values().collect())
        .collect();

    let table = build_table(config, &base, by_arm)?;
    write_table(&table, out_dir)?;
    Ok(table)
}

fn build_table(
    config: &ExperimentConfig,
    base: &TunerConfig,
    by_arm: Vec<Vec<TuningResult>>,
) -> Result<CompareTable> {
    let [sko_std, sko_pre, rnd_std, rnd_pre]: [Vec<TuningResult>; 4] = by_arm
        .try_into()
        .map_err(|_| Error::Numerical("arm grouping mismatch".into()))?;
    let sko = compare_strategies(&sko_std, &sko_pre)?;
    let random = compare_strategies(&rnd_std, &rnd_pre)?;
    let best_sko: Vec<f64> = sko_std.iter().map(|r| r.best_mean).collect();
    let best_rnd: Vec<f64> = rnd_std.iter().map(|r| r.best_mean).collect();
    let (_, sko_vs_random_p) = crate::stats::mann_whitney_u(&best_sko, &best_rnd)?;
    Ok(CompareTable {
        region: base.region.name.clone(),
        repetitions: config.repetitions,
        sko,
        random,
        sko_vs_random_p,
    })
}

fn write_table(table: &CompareTable, out_dir: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(table)
        .map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
    std::fs::write(out_dir.join("compare_report.json"), json)?;
    std::fs::write(out_dir.join("compare_report.csv"), table.to_csv())?;
    std::fs::write(out_dir.join("compare_report.txt"), table.to_text())?;
    Ok(())
}

/// Rebuild the comparison table from the persisted ledgers in a directory.
/// Works on the output of `compare` or on any collection of paired runs.
pub fn run_report(dir: &Path) -> Result<CompareTable> {
    let mut runs: Vec<(RunHeader, TuningResult)> = Vec::new();
    let mut region = String::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("ndjson") {
            continue;
        }
        let file = read_run_file(&path)?;
        let ledger = file.ledger.clone();
        let (best_theta, best_mean) = tuner::best_theta(&ledger)?;
        region = file.header.region.clone();
        runs.push((
            file.header,
            TuningResult {
                best_theta,
                best_mean,
                distinct_theta: ledger.distinct_theta(),
                ledger,
            },
        ));
    }
    if runs.is_empty() {
        return Err(Error::NoResult(format!(
            "no .ndjson run files under {}",
            dir.display()
        )));
    }

    // Group by (strategy, preemptive) and pair by seed.
    let mut groups: BTreeMap<(String, bool), BTreeMap<u64, TuningResult>> = BTreeMap::new();
    for (header, result) in runs {
        groups
            .entry((header.strategy.to_string(), header.preemptive))
            .or_default()
            .insert(header.seed, result);
    }
    let pick = |strategy: &str, preemptive: bool| -> Result<&BTreeMap<u64, TuningResult>> {
        groups
            .get(&(strategy.to_string(), preemptive))
            .ok_or_else(|| {
                Error::NoResult(format!(
                    "missing arm {strategy}/{}",
                    if preemptive { "preemptive" } else { "standard" }
                ))
            })
    };
    let sko_std = pick("sko", false)?;
    let sko_pre = pick("sko", true)?;
    let rnd_std = pick("random", false)?;
    let rnd_pre = pick("random", true)?;

    // Seeds present in every arm, in order.
    let seeds: Vec<u64> = sko_std
        .keys()
        .filter(|s| sko_pre.contains_key(s) && rnd_std.contains_key(s) && rnd_pre.contains_key(s))
        .cloned()
        .collect();
    if seeds.is_empty() {
        return Err(Error::NoResult("no common seeds across the four arms".into()));
    }
    let collect = |m: &BTreeMap<u64, TuningResult>| -> Vec<TuningResult> {
        seeds.iter().map(|s| m[s].clone()).collect()
    };
    let by_arm = vec![
        collect(sko_std),
        collect(sko_pre),
        collect(rnd_std),
        collect(rnd_pre),
    ];

    let sko = compare_strategies(&by_arm[0], &by_arm[1])?;
    let random = compare_strategies(&by_arm[2], &by_arm[3])?;
    let best_sko: Vec<f64> = by_arm[0].iter().map(|r| r.best_mean).collect();
    let best_rnd: Vec<f64> = by_arm[2].iter().map(|r| r.best_mean).collect();
    let (_, sko_vs_random_p) = crate::stats::mann_whitney_u(&best_sko, &best_rnd)?;
    let table = CompareTable {
        region,
        repetitions: seeds.len(),
        sko,
        random,
        sko_vs_random_p,
    };
    write_table(&table, dir)?;
    Ok(table)
}

/// Median quality of a factor vector over seeded dipoles; shared by the
/// examples and the acceptance suite for convergence studies.
pub fn median_quality_over_dipoles(
    config: &ExperimentConfig,
    theta: &ThetaVector,
    region: &DipoleRegion,
    dipoles: usize,
    seed: u64,
) -> Result<f64> {
    let mut objective = mfs_objective(config)?;
    use crate::objective::{Objective, Prepared};
    let state = match objective.prepare(theta)? {
        Prepared::Ready(s) => s,
        Prepared::Failed(r) => return Err(Error::NoResult(format!("failed vector: {r}"))),
    };
    let mut rng = RngStream::new(seed, 0);
    let mut qs = Vec::with_capacity(dipoles);
    for _ in 0..dipoles {
        let dipole = sample_dipole(region, &config.head, &mut rng)?;
        qs.push(objective.evaluate(&state, &dipole)?);
    }
    median(&qs)
}

/// Expected-improvement value for external inspection (re-exported here so
/// the binary does not need the kriging module directly).
pub fn ei_value(mean: f64, stddev: f64, best: f64) -> f64 {
    expected_improvement_value(mean, stddev, best)
}

/// A plausible default probe dipole for `forward`: mid-depth, oblique.
pub fn default_probe_dipole(config: &ExperimentConfig) -> Dipole {
    let r = 0.4 * config.head.r_brain;
    let position = [0.3 * r, -0.2 * r, 0.8 * r];
    debug_assert!(norm(&position) < config.head.r_brain);
    Dipole::new(position, [0.36, 0.48, 0.8])
}
