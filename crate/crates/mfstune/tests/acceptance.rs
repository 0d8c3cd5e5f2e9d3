//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Run with `cargo test --test acceptance`.
//!
//! The expensive criteria (the grid certification in particular) run at the
//! full reference configuration; expect several minutes on one core.

use std::time::{Duration, Instant};

use mfstune::geometry::{spiral_points, CenterCounts, HeadModel, ThetaBounds, ThetaVector};
use mfstune::harness::ExperimentConfig;
use mfstune::kriging::expected_improvement_value;
use mfstune::objective::synthetic::SmoothPeak;
use mfstune::objective::{MfsObjective, Objective, Prepared};
use mfstune::oracle::{homogeneous_reference, layered_potential, Dipole, OracleConfig};
use mfstune::sampling::{catalog_region, sample_dipole, DipoleRegion, RegionKind, RngStream};
use mfstune::stats::{compare_strategies, mann_whitney_u, median};
use mfstune::tuner::{pooled_mean, run, Ledger, LedgerEntry, Strategy, TunerConfig, TuningResult};

fn pass(criterion: usize, detail: &str) {
    println!("ACCEPTANCE {criterion}: PASS - {detail}");
}

fn mfs_objective(config: &ExperimentConfig) -> MfsObjective {
    MfsObjective::new(
        config.head,
        config.mfs_config(),
        config.test_points,
        config.oracle_config(),
        config.metric_options(),
    )
    .unwrap()
}

fn quality_panel(
    objective: &mut MfsObjective,
    theta: &ThetaVector,
    dipoles: &[Dipole],
) -> Option<Vec<f64>> {
    match objective.prepare(theta).unwrap() {
        Prepared::Ready(state) => Some(
            dipoles
                .iter()
                .map(|d| objective.evaluate(&state, d).unwrap())
                .collect(),
        ),
        Prepared::Failed(_) => None,
    }
}

fn draw_dipoles(region: &DipoleRegion, head: &HeadModel, n: usize, seed: u64) -> Vec<Dipole> {
    let mut rng = RngStream::new(seed, 0);
    (0..n)
        .map(|_| sample_dipole(region, head, &mut rng).unwrap())
        .collect()
}

/// Criterion 1: with uniform conductivity 0.33, the layered series matches
/// the homogeneous-sphere reference within 1e-8 relative on 200 scalp
/// points for 20 random dipoles of eccentricity <= 0.8, in under 10 s.
#[test]
fn criterion_1_oracle_correctness() {
    let start = Instant::now();
    let head = HeadModel::default().with_uniform_conductivity(0.33);
    let eval = spiral_points(200, head.r_scalp).unwrap();
    let cfg = OracleConfig::default();
    let region = DipoleRegion::new(
        "ecc-0.8-ball",
        RegionKind::Ball {
            center: [0.0, 0.0, 0.0],
            radius: 0.8 * head.r_brain,
        },
    );
    let dipoles = draw_dipoles(&region, &head, 20, 101);

    let mut worst = 0.0f64;
    for dipole in &dipoles {
        let lay = layered_potential(&head, dipole, &eval, &cfg).unwrap();
        let hom = homogeneous_reference(0.33, head.r_scalp, dipole, &eval).unwrap();
        let num: f64 = lay
            .values
            .iter()
            .zip(&hom.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = hom.values.iter().map(|v| v * v).sum();
        worst = worst.max((num / den).sqrt());
    }
    let elapsed = start.elapsed();
    assert!(worst < 1e-8, "worst relative error {worst}");
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    pass(
        1,
        &format!("layered vs homogeneous worst rel err {worst:.2e} over 20 dipoles in {elapsed:.1?}"),
    );
}

/// The certification oracle of criterion 2: 11 points per factor over the
/// three inflation factors (deflations fixed mid-box), each grid point
/// scored by its worst quality over a shared panel of deep dipoles.
/// The worst-case statistic is deliberate: the raw metric's heavy left tail
/// (the free-constant mode of the insulated problem) makes a small panel's
/// median an overfit-prone certifier.
fn grid_certify(config: &ExperimentConfig) -> (ThetaVector, f64, usize) {
    let mut grid_cfg = config.clone();
    grid_cfg.test_points = 300;
    let mut objective = mfs_objective(&grid_cfg);
    let region = catalog_region(2).unwrap();
    let panel = draw_dipoles(&region, &config.head, 8, 20260810);

    let (lo, hi) = (1.05f64, 2.5f64);
    let steps: Vec<f64> = (0..11).map(|i| lo + (hi - lo) * i as f64 / 10.0).collect();
    let mut best: Option<(ThetaVector, f64)> = None;
    let mut failures = 0usize;
    for &a in &steps {
        for &b in &steps {
            for &c in &steps {
                let theta = ThetaVector::new(a, 0.5, b, 0.5, c);
                match quality_panel(&mut objective, &theta, &panel) {
                    Some(qs) => {
                        let score = qs.iter().cloned().fold(f64::INFINITY, f64::min);
                        if best.is_none() || score > best.as_ref().unwrap().1 {
                            best = Some((theta, score));
                        }
                    }
                    None => failures += 1,
                }
            }
        }
    }
    let (theta, score) = best.expect("grid found no valid factor vector");
    (theta, score, failures)
}

/// Criteria 2 and 3 share the certified factor vector, so they run as one
/// test with one pass line each.
///
/// 2: at the reference configuration the certified vector's median quality
///    over 20 fresh deep dipoles exceeds 2, with the grid done in <10 min.
/// 3: median quality is nondecreasing in the collocation count 75->150->300
///    (10 dipoles, fixed seed). The sweep runs at halved center counts (270
///    columns) because the reference 540 columns exceed the 375 rows of the
///    n_colloc=75 system, which the rank rule rejects outright.
#[test]
fn criterion_2_mfs_validity_and_3_convergence_trend() {
    let config = ExperimentConfig::paper();
    let start = Instant::now();
    let (theta_star, grid_score, grid_failures) = grid_certify(&config);
    let grid_elapsed = start.elapsed();
    assert!(
        grid_elapsed < Duration::from_secs(600),
        "grid took {grid_elapsed:?}"
    );

    let mut objective = mfs_objective(&config);
    let region = catalog_region(2).unwrap();
    let fresh = draw_dipoles(&region, &config.head, 20, 777);
    let qs = quality_panel(&mut objective, &theta_star, &fresh)
        .expect("certified vector must factorize");
    let med = median(&qs).unwrap();
    assert!(
        med > 2.0,
        "median quality {med} at certified theta {:?}",
        theta_star.as_array()
    );
    pass(
        2,
        &format!(
            "grid ({} failures) certified theta {:?} (panel worst {grid_score:.2}); fresh 20-dipole median Q = {med:.3} > 2 in {grid_elapsed:.0?}",
            grid_failures,
            theta_star.as_array()
        ),
    );

    // Criterion 3: convergence trend in the collocation count.
    let reduced = CenterCounts {
        scalp_inflated: 90,
        scalp_deflated: 45,
        skull_inflated: 45,
        skull_deflated: 45,
        brain_inflated: 45,
    };
    let ten = draw_dipoles(&region, &config.head, 10, 888);
    let mut medians = Vec::new();
    for n_colloc in [75usize, 150, 300] {
        let mut cfg = config.clone();
        cfg.n_colloc = n_colloc;
        cfg.counts = reduced;
        let mut obj = mfs_objective(&cfg);
        let qs = quality_panel(&mut obj, &theta_star, &ten)
            .expect("reduced-count system must factorize");
        medians.push(median(&qs).unwrap());
    }
    assert!(
        medians[0] <= medians[1] && medians[1] <= medians[2],
        "medians not nondecreasing: {medians:?}"
    );
    pass(
        3,
        &format!(
            "median Q over 10 dipoles nondecreasing in n_colloc 75/150/300: {:.3} <= {:.3} <= {:.3}",
            medians[0], medians[1], medians[2]
        ),
    );
}

/// Criterion 4: exact budget arithmetic on synthetic blackboxes, plus the
/// pooled-mean anchor, in under a second.
#[test]
fn criterion_4_budget_arithmetic() {
    use mfstune::objective::synthetic::ScriptedMeans;
    let start = Instant::now();
    let head = HeadModel::default();
    let config = TunerConfig {
        budget: 800,
        trial_len: 30,
        trial_min: 5,
        warmup: 150,
        bounds: ThetaBounds::default(),
        region: DipoleRegion::new("whole", RegionKind::WholeBrain),
        strategy: Strategy::Random,
        preemptive: true,
        seed: 4,
        pooled_include_current: false,
    };

    let mut adversary = ScriptedMeans::decreasing(1000.0, 1.0);
    let always = run(&config, &head, &mut adversary, &mut |_, _| Ok(())).unwrap();
    assert_eq!(always.distinct_theta, 135);

    let mut favourite = ScriptedMeans::increasing(0.0, 1.0);
    let never = run(&config, &head, &mut favourite, &mut |_, _| Ok(())).unwrap();
    assert_eq!(never.distinct_theta, 27);

    let entry = |values: &[f64]| LedgerEntry {
        theta: ThetaVector::new(1.5, 0.7, 1.3, 0.6, 1.4),
        q_values: values.to_vec(),
        preempted: false,
        failed: false,
        budget_truncated: false,
        failure: None,
    };
    let mut ledger = Ledger::new();
    ledger.push(entry(&[1.0, 2.0, 3.0]));
    ledger.push(entry(&[4.0, 5.0, 6.0]));
    assert_eq!(pooled_mean(&ledger).unwrap(), 3.5);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass(
        4,
        &format!("always-preempt 135, never-preempt 27 distinct vectors; pooled mean 3.5 in {elapsed:?}"),
    );
}

/// Synthetic noisy objective used by criteria 5 and 6: smooth single peak
/// over the factor box with i.i.d. Gaussian noise whose spread (0.5) matches
/// the per-vector quality spread observed on the MFS stack in the
/// well-behaved region (0.25-0.5).
fn synthetic_objective() -> SmoothPeak {
    SmoothPeak {
        bounds: ThetaBounds::default(),
        peak: [0.3, 0.7, 0.5, 0.4, 0.6],
        baseline: 1.0,
        amplitude: 3.0,
        width: 0.3,
        noise_sigma: 0.5,
    }
}

fn desk_budget_config(strategy: Strategy, preemptive: bool, seed: u64) -> TunerConfig {
    let cfg = TunerConfig {
        budget: 200,
        trial_len: 10,
        trial_min: 3,
        warmup: 50,
        bounds: ThetaBounds::default(),
        region: DipoleRegion::new("whole", RegionKind::WholeBrain),
        strategy,
        preemptive: true,
        seed,
        pooled_include_current: false,
    };
    if preemptive {
        cfg
    } else {
        cfg.standard_variant()
    }
}

fn synthetic_arm(strategy: Strategy, preemptive: bool, seeds: u64) -> Vec<TuningResult> {
    let head = HeadModel::default();
    (0..seeds)
        .map(|rep| {
            let cfg = desk_budget_config(strategy, preemptive, 1000 + rep);
            run(&cfg, &head, &mut synthetic_objective(), &mut |_, _| Ok(())).unwrap()
        })
        .collect()
}

/// Criterion 5: over 30 paired seeds at desk budgets, the preemptive arm's
/// median best-found value is at least the standard arm's, and it tests
/// strictly more distinct vectors in at least 25 of the 30 seeds. <2 min.
#[test]
fn criterion_5_preemption_benefit() {
    let start = Instant::now();
    let standard = synthetic_arm(Strategy::Sko, false, 30);
    let preemptive = synthetic_arm(Strategy::Sko, true, 30);

    let report = compare_strategies(&standard, &preemptive).unwrap();
    assert!(
        report.median_preemptive >= report.median_standard,
        "preemptive median {} below standard {}",
        report.median_preemptive,
        report.median_standard
    );
    let more_distinct = standard
        .iter()
        .zip(&preemptive)
        .filter(|(s, p)| p.distinct_theta > s.distinct_theta)
        .count();
    assert!(
        more_distinct >= 25,
        "preemptive arm tested more vectors in only {more_distinct}/30 seeds"
    );
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    pass(
        5,
        &format!(
            "preemptive median {:.3} >= standard {:.3}; more distinct vectors in {more_distinct}/30 seeds (median bonus {:.0}) in {elapsed:.1?}",
            report.median_preemptive, report.median_standard, report.bonus
        ),
    );
}

/// Criterion 6: kriging (standard) beats random search (standard) on the
/// same synthetic objective: higher median best-found and Mann-Whitney
/// p < 0.05 over 30 paired seeds. <2 min.
#[test]
fn criterion_6_sko_beats_random_search() {
    let start = Instant::now();
    let sko = synthetic_arm(Strategy::Sko, false, 30);
    let random = synthetic_arm(Strategy::Random, false, 30);
    let best_sko: Vec<f64> = sko.iter().map(|r| r.best_mean).collect();
    let best_random: Vec<f64> = random.iter().map(|r| r.best_mean).collect();
    let med_sko = median(&best_sko).unwrap();
    let med_random = median(&best_random).unwrap();
    let (_, p) = mann_whitney_u(&best_sko, &best_random).unwrap();
    assert!(
        med_sko > med_random,
        "kriging median {med_sko} not above random {med_random}"
    );
    assert!(p < 0.05, "Mann-Whitney p = {p}");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    pass(
        6,
        &format!(
            "kriging median {med_sko:.3} > random {med_random:.3}, Mann-Whitney p = {p:.2e} in {elapsed:.1?}"
        ),
    );
}

/// Criterion 7: the implementation's exact Mann-Whitney p matches an
/// independent brute-force enumeration for every tie-free |a| = |b| = 4 pair
/// from 100 random permutations, and U_a + U_b = |a||b| holds on 1000
/// random tied samples.
#[test]
fn criterion_7_mann_whitney_oracle_equivalence() {
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Independent oracle: enumerate all C(8,4) subsets of the pooled ranks.
    fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b.iter()).cloned().collect();
        let mut sorted = pooled.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let rank_of = |v: f64| sorted.iter().position(|s| *s == v).unwrap() + 1;
        let u_of = |subset: &[usize]| -> f64 {
            let rank_sum: usize = subset.iter().sum();
            rank_sum as f64 - (subset.len() * (subset.len() + 1)) as f64 / 2.0
        };
        let observed: Vec<usize> = a.iter().map(|v| rank_of(*v)).collect();
        let u_obs = u_of(&observed);
        let center = (a.len() * b.len()) as f64 / 2.0;

        let n = pooled.len();
        let mut extreme = 0usize;
        let mut total = 0usize;
        // All 4-subsets of ranks 1..=8.
        for i in 1..=n {
            for j in (i + 1)..=n {
                for k in (j + 1)..=n {
                    for l in (k + 1)..=n {
                        let u = u_of(&[i, j, k, l]);
                        total += 1;
                        if (u - center).abs() >= (u_obs - center).abs() - 1e-9 {
                            extreme += 1;
                        }
                    }
                }
            }
        }
        extreme as f64 / total as f64
    }

    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let base: Vec<f64> = (1..=8).map(|v| v as f64 + 0.01 * v as f64).collect();
    for _ in 0..100 {
        let mut perm = base.clone();
        perm.shuffle(&mut rng);
        let (a, b) = perm.split_at(4);
        let (_, p_impl) = mann_whitney_u(a, b).unwrap();
        let p_oracle = enumerated_p(a, b);
        assert!(
            (p_impl - p_oracle).abs() < 1e-12,
            "implementation {p_impl} vs enumeration {p_oracle} for {a:?} vs {b:?}"
        );
    }

    for _ in 0..1000 {
        let n_a = rng.random_range(1..12usize);
        let n_b = rng.random_range(1..12usize);
        let a: Vec<f64> = (0..n_a).map(|_| rng.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..n_b).map(|_| rng.random_range(0..6) as f64).collect();
        let (u_a, _) = mann_whitney_u(&a, &b).unwrap();
        let (u_b, _) = mann_whitney_u(&b, &a).unwrap();
        assert!(
            (u_a + u_b - (n_a * n_b) as f64).abs() < 1e-9,
            "U complementarity failed for {a:?} vs {b:?}"
        );
    }
    pass(7, "exact p matches brute-force enumeration on 100 permutations; U_a + U_b = |a||b| on 1000 tied samples");
}

/// Criterion 8: expected-improvement anchors.
#[test]
fn criterion_8_expected_improvement_anchors() {
    let at_best = expected_improvement_value(3.0, 1.0, 3.0);
    assert!(
        (at_best - 0.398942).abs() < 1e-6,
        "EI(mu=best, s=1) = {at_best}"
    );
    assert_eq!(expected_improvement_value(2.0, 0.0, 3.0), 0.0);
    assert_eq!(expected_improvement_value(4.0, 0.0, 3.0), 1.0);
    pass(
        8,
        &format!("EI(mu=best,s=1) = {at_best:.6} within 1e-6 of 0.398942; s=0 limits exact"),
    );
}

/// Criterion 9: fixed-seed `tune` runs are byte-identical, and killing a run
/// after entries 1 and 3 then resuming reproduces the uninterrupted ledger
/// exactly. Exercised through the CLI binary at a reduced solver size.
#[test]
fn criterion_9_determinism_and_resume() {
    use std::process::Command;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        r#"{
            "n_colloc": 40,
            "counts": {
                "scalp_inflated": 24,
                "scalp_deflated": 12,
                "skull_inflated": 12,
                "skull_deflated": 12,
                "brain_inflated": 12
            },
            "test_points": 50,
            "budget": 30,
            "trial_len": 5,
            "trial_min": 2,
            "warmup": 10,
            "seed": 77
        }"#,
    )
    .unwrap();
    let config = config_path.to_str().unwrap();

    let tune_into = |out: &std::path::Path| {
        let res = Command::new(env!("CARGO_BIN_EXE_mfstune"))
            .args(["tune", "--config", config, "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    tune_into(&out_a);
    tune_into(&out_b);
    let name = "run_sko_preemptive_seed00077.ndjson";
    let reference = std::fs::read(out_a.join(name)).unwrap();
    assert_eq!(
        reference,
        std::fs::read(out_b.join(name)).unwrap(),
        "fixed-seed runs differ"
    );

    // Interrupt after entries 1 and 3 (run-start line + k entry lines), then
    // resume within the remaining budget.
    let text = String::from_utf8(reference.clone()).unwrap();
    for kill_after in [1usize, 3] {
        let prefix: Vec<&str> = text.lines().take(1 + kill_after).collect();
        let resumed_path = dir.path().join(format!("killed_after_{kill_after}.ndjson"));
        std::fs::write(&resumed_path, prefix.join("\n") + "\n").unwrap();
        let res = Command::new(env!("CARGO_BIN_EXE_mfstune"))
            .args([
                "tune",
                "--config",
                config,
                "--resume",
                resumed_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert_eq!(
            std::fs::read(&resumed_path).unwrap(),
            reference,
            "resume after {kill_after} entries diverged"
        );
    }
    pass(9, "fixed-seed tune byte-identical; kill-and-resume after entries 1 and 3 equals the uninterrupted run");
}

/// Criterion 10: the desk-preset comparison on catalog region 1 with 5
/// repetitions completes within 30 minutes and emits a structurally
/// complete table.
#[test]
fn criterion_10_end_to_end_compare() {
    use std::process::Command;
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, r#"{"repetitions": 5}"#).unwrap();
    let out_dir = dir.path().join("runs");

    let res = Command::new(env!("CARGO_BIN_EXE_mfstune"))
        .args([
            "compare",
            "--preset",
            "desk",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1800), "took {elapsed:?}");

    // Structural completeness: 4 CSV arm rows with finite medians, the JSON
    // report with both family comparisons, and 20 per-run ledgers.
    let csv = std::fs::read_to_string(out_dir.join("compare_report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5, "csv:\n{csv}");
    assert_eq!(lines[0], "index,strategy,median_q,bonus,p_value,significant");
    for arm in ["sko_standard", "sko_preemptive", "random_standard", "random_preemptive"] {
        let row = lines.iter().find(|l| l.contains(arm)).unwrap_or_else(|| panic!("missing {arm}"));
        let median: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(median.is_finite());
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("compare_report.json")).unwrap())
            .unwrap();
    assert_eq!(json["region"], "deep-central-ball");
    assert_eq!(json["repetitions"], 5);
    for family in ["sko", "random"] {
        assert!(json[family]["median_standard"].is_f64());
        assert!(json[family]["median_preemptive"].is_f64());
        assert!(json[family]["p_value"].is_f64());
    }
    let ledgers = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .map(|x| x == "ndjson")
                .unwrap_or(false)
        })
        .count();
    assert_eq!(ledgers, 20);
    pass(
        10,
        &format!(
            "desk compare on region 1 (5 paired repetitions, 4 arms) complete in {elapsed:.0?} with full CSV/JSON/text reports"
        ),
    );
}
