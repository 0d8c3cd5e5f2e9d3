//! The analytic reference validating itself: homogeneous reduction,
//! linearity, axisymmetry, and truncation stability.
//!
//! Run with: `cargo run --release --example oracle_check`

use mfstune::harness::{run_oracle_check, ExperimentConfig};

fn main() -> mfstune::Result<()> {
    let config = ExperimentConfig::desk();
    let report = run_oracle_check(&config)?;
    println!("{report}");

    // The central-dipole closed form is the one value known in closed form:
    // u = 3 (q . r_hat) / (4 pi sigma R^2).
    use mfstune::geometry::PointSet;
    use mfstune::oracle::{central_dipole_closed_form, homogeneous_reference, Dipole};
    let dipole = Dipole::new([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
    let eval = PointSet {
        points: vec![[0.0, 0.0, 0.1]],
        radius: 0.1,
    };
    let series = homogeneous_reference(0.33, 0.1, &dipole, &eval)?;
    let closed = central_dipole_closed_form(0.33, 0.1, &dipole.moment, &eval.points[0]);
    println!("\ncentral dipole anchor: series {:.6} V vs closed form {closed:.6} V", series.values[0]);
    Ok(())
}
