//! Tuning the fictitious-boundary scale factors of a method-of-fundamental-
//! solutions (MFS) forward solver for the three-shell sphere EEG head model.
//!
//! The crate bundles the full experiment stack:
//!
//! - [`geometry`]: the concentric head model, spiral point sets, and the
//!   mapping from the five scale factors to fictitious source spheres;
//! - [`oracle`]: the analytic layered-sphere scalp potential used as ground
//!   truth;
//! - [`mfs`]: assembly and truncated-SVD solution of the coupled collocation
//!   system, plus the scalar solution-quality metric;
//! - [`sampling`]: seeded random dipoles drawn uniformly from configurable
//!   brain regions;
//! - [`kriging`]: a Gaussian-process surrogate with per-point observation
//!   noise and an expected-improvement suggestion engine;
//! - [`tuner`]: the sequential optimization loop with optional preemptive
//!   termination of underperforming factor vectors;
//! - [`stats`]: Mann-Whitney comparisons of tuning strategies;
//! - [`harness`]: configuration, persistence, and the command layer behind
//!   the `mfstune` binary.
//!
//! Start with the runnable examples (`cargo run --example forward_solve`,
//! `tune_synthetic`, `compare_synthetic`, ...) for end-to-end usage.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod kriging;
pub mod mfs;
pub mod objective;
pub mod oracle;
pub mod sampling;
pub mod stats;
pub mod tuner;
pub(crate) mod vec3;

pub use error::{Error, Result};
