// Temporary calibration driver v4: trace one kriging run on the synthetic
// objective to debug suggestion behaviour.

use mfstune::geometry::{HeadModel, ThetaBounds};
use mfstune::kriging::{expected_improvement_value, fit};
use mfstune::objective::synthetic::SmoothPeak;
use mfstune::sampling::{DipoleRegion, RegionKind, RngStream};
use mfstune::tuner::{run, Strategy, TunerConfig};

fn main() {
    let bounds = ThetaBounds::default();
    let mut objective = SmoothPeak {
        bounds,
        peak: [0.3, 0.7, 0.5, 0.4, 0.6],
        baseline: 1.0,
        amplitude: 3.0,
        width: 0.3,
        noise_sigma: 0.5,
    };
    let truth = |x: &[f64; 5]| {
        let s: f64 = (0..5).map(|d| (x[d] - 0.0 - [0.3, 0.7, 0.5, 0.4, 0.6][d]).powi(2)).sum();
        1.0 + 3.0 * (-s / (2.0 * 0.3 * 0.3)).exp()
    };

    let config = TunerConfig {
        budget: 200,
        trial_len: 10,
        trial_min: 10,
        warmup: 50,
        bounds,
        region: DipoleRegion::new("whole", RegionKind::WholeBrain),
        strategy: Strategy::Sko,
        preemptive: false,
        seed: 1003,
        pooled_include_current: false,
    };
    let head = HeadModel::default();
    let result = run(&config, &head, &mut objective, &mut |i, e| {
        let x = ThetaBounds::default().normalize(&e.theta);
        println!(
            "entry {i:>2}: x {:?} truth {:.3} mean {:.3}",
            x.map(|v| (v * 100.0).round() / 100.0),
            truth(&x),
            e.mean()
        );
        Ok(())
    })
    .unwrap();
    println!("best {:.3}\n", result.best_mean);

    // Re-fit on the final ledger and inspect the hyperparameters + EI field.
    let mut rng = RngStream::new(99, 0);
    let gp = fit(&result.ledger.observations(), &bounds, &mut rng).unwrap();
    println!(
        "final fit: lengthscales {:?} signal {:.4} incumbent {:.3}",
        gp.lengthscales().map(|l| (l * 1000.0).round() / 1000.0),
        gp.signal_variance(),
        gp.incumbent_best()
    );
    for x in [
        [0.3, 0.7, 0.5, 0.4, 0.6],
        [0.5; 5],
        [0.1; 5],
        [0.9; 5],
    ] {
        let theta = bounds.denormalize(&x);
        let (mu, sd) = gp.predict(&theta);
        println!(
            "  at {:?}: mu {:.3} sd {:.3} EI {:.5}",
            x,
            mu,
            sd,
            expected_improvement_value(mu, sd, gp.incumbent_best())
        );
    }
}
