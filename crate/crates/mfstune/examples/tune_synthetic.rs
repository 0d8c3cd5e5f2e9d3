//! The full tuning loop on a cheap synthetic objective: kriging suggestions
//! plus preemptive termination of weak trials. Fast enough to re-run while
//! experimenting with budgets.
//!
//! Run with: `cargo run --release --example tune_synthetic`

use mfstune::geometry::{HeadModel, ThetaBounds};
use mfstune::objective::synthetic::SmoothPeak;
use mfstune::sampling::{DipoleRegion, RegionKind};
use mfstune::tuner::{run, Strategy, TunerConfig};

fn main() -> mfstune::Result<()> {
    let bounds = ThetaBounds::default();
    let config = TunerConfig {
        budget: 200,
        trial_len: 10,
        trial_min: 3,
        warmup: 50,
        bounds,
        region: DipoleRegion::new("whole", RegionKind::WholeBrain),
        strategy: Strategy::Sko,
        preemptive: true,
        seed: 11,
        pooled_include_current: false,
    };
    let mut objective = SmoothPeak {
        bounds,
        peak: [0.3, 0.7, 0.5, 0.4, 0.6],
        baseline: 1.0,
        amplitude: 3.0,
        width: 0.3,
        noise_sigma: 0.5,
    };

    let result = run(
        &config,
        &HeadModel::default(),
        &mut objective,
        &mut |index, entry| {
            println!(
                "trial {index:>3}: {} values{}{} mean {:.3}",
                entry.q_values.len(),
                if entry.preempted { ", preempted" } else { "" },
                if entry.budget_truncated { ", truncated" } else { "" },
                entry.mean()
            );
            Ok(())
        },
    )?;

    println!("\nevaluations: {} of {}", result.ledger.evaluations_used(), config.budget);
    println!("distinct vectors tried: {}", result.distinct_theta);
    println!("best mean: {:.3} (noiseless truth there: {:.3})",
        result.best_mean,
        objective.value(&result.best_theta));
    println!(
        "best point (normalized): {:?}  true peak: {:?}",
        bounds
            .normalize(&result.best_theta)
            .map(|v| (v * 100.0).round() / 100.0),
        objective.peak
    );
    Ok(())
}
