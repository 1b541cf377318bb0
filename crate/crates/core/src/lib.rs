//! Model-based clustering for continuous and mixed-type data in which values
//! may be missing not at random.
//!
//! Each mixture component carries, per variable, an observation probability
//! and a nonparametric density for the observed values, so the missingness
//! pattern itself contributes to cluster assignment. Estimation maximizes a
//! smoothed log-likelihood with a majorization-minimization scheme whose
//! ascent property is tested, not assumed.
//!
//! Modules:
//! - [`data`]: masked datasets, variable metadata, standardization.
//! - [`kernel`]: bandwidths, grids, weighted KDE, log-density smoothing.
//! - [`model`]: mixture parameters, responsibilities, smoothed log-likelihood.
//! - [`estimator`]: parameter updates, the fit loop, model-order selection.
//! - [`simulate`]: synthetic scenarios and tabulated generator parameters.
//! - [`bench`]: seeded benchmark runner comparing methods over replicates.
//! - [`metrics`]: adjusted Rand index, misclassification, reports.
//! - [`kpod`]: K-means baseline that alternates completion and clustering.
//! - [`io`]: CSV ingestion and the versioned model file.

pub mod bench;
pub mod data;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kernel;
pub mod kpod;
pub mod metrics;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
