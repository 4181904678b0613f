//! Sparse sensor selection for linear field reconstruction under spatially
//! correlated measurement noise.
//!
//! The pipeline is:
//!
//! 1. [`rom_noise::fit_rom`] takes a snapshot matrix to a truncated-SVD
//!    reduced-order model, and [`rom_noise::build_noise_model`] turns the
//!    truncated modes into a low-rank-plus-diagonal noise covariance.
//! 2. A selector picks `p` rows: the ADMM solver in [`admm`] (group ℓ0
//!    constrained A-optimal design), the greedy baselines in [`greedy`], or
//!    the exhaustive [`oracle`] for tiny instances.
//! 3. [`estimation`] evaluates the A-optimality criterion and reconstructs
//!    fields by whitened least squares.
//!
//! [`synthetic`] produces reproducible test data with a prescribed spectrum
//! and [`ingest`] loads gridded datasets and builds cross-validation folds.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod error;
pub mod estimation;
pub mod greedy;
pub mod ingest;
mod linalg;
pub mod methods;
pub mod oracle;
pub mod rom_noise;
pub mod synthetic;

pub use admm::{AdmmProblem, Normalization, Penalty, SolveOutcome, SolverConfig, SolverState, TraceRecord};
pub use error::{Error, Result};
pub use estimation::{Estimator, SensorSet};
pub use greedy::{GreedyConfig, GreedyResult, NoiseMode};
pub use ingest::{CvSplit, GridFormat, GriddedDataset, IndexMap};
pub use methods::{run_method, Method, MethodOutcome};
pub use rom_noise::{NoiseModel, ReducedOrderModel, SnapshotMatrix};
pub use synthetic::{Spectrum, SyntheticSpec};

/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
