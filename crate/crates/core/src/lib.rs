//! Estimating a blackbox classifier's accuracy on unlabeled production data
//! from a small, possibly drifted, labeled test set.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: datasets, CSV ingestion, biased splitting and pool carving
//! - [`basemodel`]: the blackbox model interface, a linear-softmax classifier
//!   and ingestion of externally produced scores
//! - [`predictor`]: the confidence-binning performance predictor
//! - [`resample`]: vector-quantization codebook, importance weights and
//!   integer upsampling
//! - [`strategy`]: add-only / add-delete test-set maintenance
//! - [`metrics`]: error curves, AUC, ranks and labeling effort saved
//! - [`harness`]: synthetic data and the experiment grid

pub mod basemodel;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod predictor;
pub mod resample;
pub mod seed;
pub mod strategy;

pub use error::{Error, Result};
