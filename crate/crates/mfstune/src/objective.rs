//! The black-box objective driven by the tuner: a preparation step per
//! factor vector (where invalid parameterizations are detected before any
//! evaluation budget is spent) and a per-dipole quality evaluation.
//!
//! The production objective wraps the MFS stack scored against the analytic
//! reference; the synthetic objectives swap in cheap functions with
//! controllable behaviour for tests, examples, and calibration runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{spiral_points, HeadModel, PointSet, ThetaBounds, ThetaVector};
use crate::mfs::{assemble, factorize, quality_q, MetricOptions, MfsConfig, MfsSolver};
use crate::oracle::{layered_potential, Dipole, OracleConfig};

/// Why a factor vector was rejected without consuming budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureReason {
    /// Collocation matrix numerically rank deficient.
    RankDeficient { rank: usize, cols: usize },
    /// A fictitious sphere collided with a physical interface.
    DegenerateGeometry,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::RankDeficient { rank, cols } => {
                write!(f, "rank deficient ({rank}/{cols})")
            }
            FailureReason::DegenerateGeometry => write!(f, "degenerate geometry"),
        }
    }
}

/// Outcome of preparing a factor vector.
pub enum Prepared<S> {
    Ready(S),
    Failed(FailureReason),
}

/// A tunable black box: quality of a factor vector on one dipole.
pub trait Objective {
    type State;

    /// Build the per-factor-vector state (for the MFS stack: assemble and
    /// factorize the dipole-independent system). A `Failed` outcome marks
    /// the vector invalid at zero budget cost; a hard error aborts the run.
    fn prepare(&mut self, theta: &ThetaVector) -> Result<Prepared<Self::State>>;

    /// Score one dipole using the prepared state.
    fn evaluate(&mut self, state: &Self::State, dipole: &Dipole) -> Result<f64>;
}

/// The production objective: MFS forward solve scored against the layered
/// analytic solution at a fixed set of scalp test points.
pub struct MfsObjective {
    pub head: HeadModel,
    pub mfs: MfsConfig,
    pub oracle: OracleConfig,
    pub metric: MetricOptions,
    test: PointSet,
}

impl MfsObjective {
    pub fn new(
        head: HeadModel,
        mfs: MfsConfig,
        test_points: usize,
        oracle: OracleConfig,
        metric: MetricOptions,
    ) -> Result<Self> {
        // The SVD dominates the per-vector cost; run it sequentially and let
        // callers parallelize across repetitions instead.
        faer::set_global_parallelism(faer::Par::Seq);
        let test = spiral_points(test_points, head.r_scalp)?;
        Ok(MfsObjective {
            head,
            mfs,
            oracle,
            metric,
            test,
        })
    }

    pub fn test_points(&self) -> &PointSet {
        &self.test
    }
}

impl Objective for MfsObjective {
    type State = MfsSolver;

    fn prepare(&mut self, theta: &ThetaVector) -> Result<Prepared<MfsSolver>> {
        match assemble(theta, &self.head, &self.mfs).and_then(|s| factorize(s, &self.mfs)) {
            Ok(solver) => Ok(Prepared::Ready(solver)),
            Err(Error::RankFailure { rank, cols }) => {
                Ok(Prepared::Failed(FailureReason::RankDeficient { rank, cols }))
            }
            Err(Error::GeometryDegenerate(_)) | Err(Error::Singularity) => {
                Ok(Prepared::Failed(FailureReason::DegenerateGeometry))
            }
            Err(e) => Err(e),
        }
    }

    fn evaluate(&mut self, solver: &MfsSolver, dipole: &Dipole) -> Result<f64> {
        let solution = solver.solve(dipole)?;
        let u_mfs = solver.evaluate_scalp(&solution, &self.test)?;
        let u_true = layered_potential(&self.head, dipole, &self.test, &self.oracle)?;
        Ok(quality_q(&u_mfs, &u_true, &self.metric)?.0)
    }
}

/// Synthetic objectives for tests and calibration.
pub mod synthetic {
    use super::*;

    /// Deterministic noise seed derived from a dipole's bit pattern, so a
    /// synthetic objective stays a pure function of (theta, dipole).
    pub fn dipole_noise_seed(dipole: &Dipole) -> u64 {
        let mut h = 0x9e3779b97f4a7c15u64;
        for v in dipole
            .position
            .iter()
            .chain(dipole.moment.iter())
        {
            h ^= v.to_bits();
            h = h.wrapping_mul(0xbf58476d1ce4e5b9);
            h ^= h >> 27;
        }
        h
    }

    /// Standard normal draw keyed by the dipole.
    pub fn dipole_noise(dipole: &Dipole) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(dipole_noise_seed(dipole));
        rng.sample(StandardNormal)
    }

    /// Smooth single-peak response over the normalized factor box with
    /// additive i.i.d. Gaussian noise: baseline + amplitude *
    /// exp(-|x - peak|^2 / (2 width^2)) + noise.
    pub struct SmoothPeak {
        pub bounds: ThetaBounds,
        pub peak: [f64; 5],
        pub baseline: f64,
        pub amplitude: f64,
        pub width: f64,
        pub noise_sigma: f64,
    }

    impl SmoothPeak {
        /// Noiseless response at a factor vector.
        pub fn value(&self, theta: &ThetaVector) -> f64 {
            let x = self.bounds.normalize(theta);
            let mut s = 0.0;
            for d in 0..5 {
                s += (x[d] - self.peak[d]) * (x[d] - self.peak[d]);
            }
            self.baseline + self.amplitude * (-s / (2.0 * self.width * self.width)).exp()
        }
    }

    impl Objective for SmoothPeak {
        type State = f64;

        fn prepare(&mut self, theta: &ThetaVector) -> Result<Prepared<f64>> {
            Ok(Prepared::Ready(self.value(theta)))
        }

        fn evaluate(&mut self, state: &f64, dipole: &Dipole) -> Result<f64> {
            Ok(state + self.noise_sigma * dipole_noise(dipole))
        }
    }

    /// Scripted objective: the k-th prepared factor vector always scores
    /// `start + k * step` regardless of the dipole, with an optional
    /// failure cadence. Drives the budget-arithmetic properties.
    pub struct ScriptedMeans {
        pub start: f64,
        pub step: f64,
        /// Every multiple of this preparation index fails (1-based).
        pub fail_every: Option<usize>,
        prepared: usize,
    }

    impl ScriptedMeans {
        pub fn decreasing(start: f64, step: f64) -> Self {
            ScriptedMeans {
                start,
                step: -step.abs(),
                fail_every: None,
                prepared: 0,
            }
        }

        pub fn increasing(start: f64, step: f64) -> Self {
            ScriptedMeans {
                start,
                step: step.abs(),
                fail_every: None,
                prepared: 0,
            }
        }
    }

    impl Objective for ScriptedMeans {
        type State = f64;

        fn prepare(&mut self, _theta: &ThetaVector) -> Result<Prepared<f64>> {
            self.prepared += 1;
            if let Some(period) = self.fail_every {
                if self.prepared % period == 0 {
                    return Ok(Prepared::Failed(FailureReason::RankDeficient {
                        rank: 0,
                        cols: 0,
                    }));
                }
            }
            Ok(Prepared::Ready(
                self.start + (self.prepared - 1) as f64 * self.step,
            ))
        }

        fn evaluate(&mut self, state: &f64, _dipole: &Dipole) -> Result<f64> {
            Ok(*state)
        }
    }
}
