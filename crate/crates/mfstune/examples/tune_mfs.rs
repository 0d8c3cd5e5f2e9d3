//! A real tuning run against the MFS stack at reduced size, with the ledger
//! persisted record by record (kill it and resume with the CLI's
//! `tune --resume`). Takes on the order of half a minute.
//!
//! Run with: `cargo run --release --example tune_mfs`

use mfstune::harness::{run_tune, ExperimentConfig, RegionChoice};

fn main() -> mfstune::Result<()> {
    let mut config = ExperimentConfig::desk();
    config.n_colloc = 100;
    config.test_points = 100;
    config.budget = 60;
    config.trial_len = 6;
    config.trial_min = 2;
    config.warmup = 12;
    config.region = RegionChoice::Index(1);
    config.seed = 3;

    let out = std::path::Path::new("runs/example-tune");
    let summary = run_tune(&config, out)?;
    println!("{summary}");
    println!("\nreplay or resume with:");
    println!(
        "  cargo run --release -- tune --resume {}",
        summary.ledger_path.display()
    );
    Ok(())
}
