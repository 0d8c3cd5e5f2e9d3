//! The surrogate on its own: fit a Gaussian process to noisy trial
//! observations of a known function, inspect predictions, and ask the
//! expected-improvement engine for the next point to try.
//!
//! Run with: `cargo run --release --example kriging_surrogate`

use mfstune::geometry::{ThetaBounds, ThetaVector};
use mfstune::kriging::{expected_improvement_value, fit, Observation};
use mfstune::sampling::RngStream;
use rand::Rng;

fn main() -> mfstune::Result<()> {
    let bounds = ThetaBounds::default();
    let peak = [0.35, 0.6, 0.5, 0.45, 0.55];
    let truth = |x: &[f64; 5]| {
        let s: f64 = (0..5).map(|d| (x[d] - peak[d]) * (x[d] - peak[d])).sum();
        1.0 + 3.0 * (-s / (2.0 * 0.3 * 0.3)).exp()
    };

    // 24 noisy trials of varying size: the per-trial sample variance enters
    // the surrogate as observation noise (standard error of the mean).
    let mut rng = RngStream::new(7, 0);
    let mut observations = Vec::new();
    for _ in 0..24 {
        let x = [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        ];
        let theta = bounds.denormalize(&x);
        let trial_size = rng.random_range(3..12usize);
        let values: Vec<f64> = (0..trial_size)
            .map(|_| truth(&x) + 0.5 * rng.random_range(-1.0..1.0))
            .collect();
        observations.push(Observation::new(theta, values)?);
    }

    let mut fit_rng = RngStream::new(7, 1);
    let gp = fit(&observations, &bounds, &mut fit_rng)?;
    println!(
        "fitted: lengthscales {:?}, signal variance {:.3}",
        gp.lengthscales()
            .map(|l| (l * 1000.0).round() / 1000.0),
        gp.signal_variance()
    );
    println!("incumbent best mean: {:.3}", gp.incumbent_best());

    println!("\n  point                         truth   mean    sd      EI");
    for x in [
        peak,
        [0.1, 0.1, 0.1, 0.1, 0.1],
        [0.9, 0.9, 0.9, 0.9, 0.9],
        [0.4, 0.55, 0.5, 0.5, 0.5],
    ] {
        let theta = bounds.denormalize(&x);
        let (mean, sd) = gp.predict(&theta);
        let ei = expected_improvement_value(mean, sd, gp.incumbent_best());
        println!(
            "  {:<28} {:6.3} {:6.3} {:6.3} {:8.5}",
            format!("{:?}", x.map(|v| (v * 100.0).round() / 100.0)),
            truth(&x),
            mean,
            sd,
            ei
        );
    }

    let mut suggest_rng = RngStream::new(7, 2);
    let suggestion: ThetaVector = gp.suggest(&[], &mut suggest_rng);
    let xs = bounds.normalize(&suggestion);
    println!(
        "\nsuggested next trial (normalized): {:?}",
        xs.map(|v| (v * 1000.0).round() / 1000.0)
    );
    println!("truth there: {:.3} (peak value 4.0)", truth(&xs));
    Ok(())
}
