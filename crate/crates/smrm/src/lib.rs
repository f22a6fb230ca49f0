//! Sparse multivariate regression with missing responses.
//!
//! Jointly estimates a sparse coefficient matrix `B` and a sparse residual
//! precision matrix `K` for a multivariate Gaussian regression whose response
//! matrix has missing entries, by alternating conditional-moment imputation
//! (E-step) with penalized coordinate-descent and graphical-lasso updates
//! (M-step). On top of the estimator sit a lasso reference, a train/test
//! evaluation protocol with a regularization-path sweep, a synthetic-data
//! generator with known ground truth, and a CSV-based command-line interface.
//!
//! Module map:
//! * [`types`] — masked response matrices, datasets, model parameters, and
//!   Gaussian conditioning.
//! * [`linalg`] — the small dense SPD toolkit (Cholesky, solves, inverses).
//! * [`lasso`] — univariate-response coordinate descent with cross-validation.
//! * [`glasso`] — graphical lasso for the precision step.
//! * [`em`] — the joint EM estimator.
//! * [`path`] — splits, penalty-matrix construction, warm-started paths, and
//!   normalized evaluation.
//! * [`synth`] — ground-truth generators and support-recovery scoring.
//! * [`io`] — configuration, CSV ingest/export, heatmaps, run metadata.
//! * [`cli`] — the five subcommands.

pub mod cli;
pub mod em;
pub mod error;
pub mod glasso;
pub mod io;
pub mod lasso;
pub mod linalg;
pub mod path;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
