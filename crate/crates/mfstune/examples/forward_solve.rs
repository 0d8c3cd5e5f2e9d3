//! One forward solve, end to end: assemble the collocation system for a
//! factor vector, factorize it, solve for a dipole, and score the scalp
//! field against the analytic layered-sphere reference.
//!
//! Run with: `cargo run --release --example forward_solve`

use mfstune::geometry::{spiral_points, HeadModel, ThetaVector};
use mfstune::mfs::{assemble, factorize, quality_q, MetricOptions, MfsConfig};
use mfstune::oracle::{layered_potential, Dipole, OracleConfig};

fn main() -> mfstune::Result<()> {
    let head = HeadModel::default();
    let mfs_cfg = MfsConfig {
        n_colloc: 150,
        ..MfsConfig::default()
    };

    // Tight inflation keeps the free constant mode of the insulated problem
    // well determined; see the tuning examples for how this was found.
    let theta = ThetaVector::new(1.05, 0.5, 1.05, 0.5, 1.2);
    let dipole = Dipole::new([0.01, -0.007, 0.028], [0.36, 0.48, 0.8]);

    let system = assemble(&theta, &head, &mfs_cfg)?;
    println!(
        "system: {} rows x {} cols ({} centers on 5 fictitious spheres)",
        system.nrows(),
        system.ncols(),
        system.centers.total()
    );

    let solver = factorize(system, &mfs_cfg)?;
    println!(
        "factorized: rank {}, singular values {:.3e} .. {:.3e}",
        solver.rank, solver.sigma_min, solver.sigma_max
    );

    let solution = solver.solve(&dipole)?;
    println!(
        "solve: residual {:.3e} of rhs {:.3e}",
        solution.residual_norm, solution.rhs_norm
    );

    let test = spiral_points(400, head.r_scalp)?;
    let u_mfs = solver.evaluate_scalp(&solution, &test)?;
    let u_true = layered_potential(&head, &dipole, &test, &OracleConfig::default())?;
    let q = quality_q(&u_mfs, &u_true, &MetricOptions::default())?;
    println!("quality Q = {q} over {} scalp test points", test.len());

    // The same factorization serves any number of dipoles.
    for z in [0.01, 0.03, 0.05] {
        let d = Dipole::new([0.0, 0.0, z], [1.0, 0.0, 0.0]);
        let sol = solver.solve(&d)?;
        let u = solver.evaluate_scalp(&sol, &test)?;
        let t = layered_potential(&head, &d, &test, &OracleConfig::default())?;
        println!(
            "  dipole at z = {z:.2}: Q = {}",
            quality_q(&u, &t, &MetricOptions::default())?
        );
    }
    Ok(())
}
