//! Strategy shoot-out on a synthetic objective: kriging vs random search,
//! each standard vs preemptive, over paired seeds, summarized the way the
//! full comparison command reports MFS runs.
//!
//! Run with: `cargo run --release --example compare_synthetic`

use mfstune::geometry::{HeadModel, ThetaBounds};
use mfstune::objective::synthetic::SmoothPeak;
use mfstune::sampling::{DipoleRegion, RegionKind};
use mfstune::stats::compare_strategies;
use mfstune::tuner::{run, Strategy, TunerConfig, TuningResult};

fn objective() -> SmoothPeak {
    SmoothPeak {
        bounds: ThetaBounds::default(),
        peak: [0.3, 0.7, 0.5, 0.4, 0.6],
        baseline: 1.0,
        amplitude: 3.0,
        width: 0.3,
        noise_sigma: 0.5,
    }
}

fn arm(base: &TunerConfig, strategy: Strategy, preemptive: bool, reps: u64) -> Vec<TuningResult> {
    let head = HeadModel::default();
    (0..reps)
        .map(|rep| {
            let cfg = base.with_strategy(strategy).with_seed(base.seed + rep);
            let cfg = if preemptive { cfg } else { cfg.standard_variant() };
            run(&cfg, &head, &mut objective(), &mut |_, _| Ok(())).unwrap()
        })
        .collect()
}

fn main() -> mfstune::Result<()> {
    let base = TunerConfig {
        budget: 200,
        trial_len: 10,
        trial_min: 3,
        warmup: 50,
        bounds: ThetaBounds::default(),
        region: DipoleRegion::new("whole", RegionKind::WholeBrain),
        strategy: Strategy::Sko,
        preemptive: true,
        seed: 100,
        pooled_include_current: false,
    };
    let reps = 10u64;

    let sko_std = arm(&base, Strategy::Sko, false, reps);
    let sko_pre = arm(&base, Strategy::Sko, true, reps);
    let rnd_std = arm(&base, Strategy::Random, false, reps);
    let rnd_pre = arm(&base, Strategy::Random, true, reps);

    let sko = compare_strategies(&sko_std, &sko_pre)?;
    let random = compare_strategies(&rnd_std, &rnd_pre)?;

    println!("{reps} paired repetitions per arm, budget {} evaluations\n", base.budget);
    println!("                     median best Q    bonus  p-value");
    println!(
        "kriging  standard    {:>13.3}",
        sko.median_standard
    );
    println!(
        "kriging  preemptive  {:>13.3}  {:>7.1}  {:>7.4}{}",
        sko.median_preemptive,
        sko.bonus,
        sko.p_value,
        if sko.significant == Some(true) { " *" } else { "" }
    );
    println!(
        "random   standard    {:>13.3}",
        random.median_standard
    );
    println!(
        "random   preemptive  {:>13.3}  {:>7.1}  {:>7.4}{}",
        random.median_preemptive,
        random.bonus,
        random.p_value,
        if random.significant == Some(true) { " *" } else { "" }
    );

    let (_, p) = mfstune::stats::mann_whitney_u(
        &sko_std.iter().map(|r| r.best_mean).collect::<Vec<_>>(),
        &rnd_std.iter().map(|r| r.best_mean).collect::<Vec<_>>(),
    )?;
    println!("\nkriging vs random (both standard): p = {p:.4}");
    println!("(* marks p < 0.05, two-sided Mann-Whitney)");
    Ok(())
}
