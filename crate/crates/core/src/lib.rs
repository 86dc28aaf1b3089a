//! Dimensionality prediction for hybrid metal halides.
//!
//! Everything in this crate is pure computation over in-memory tables and
//! needs only `alloc`: chemical formula parsing, descriptor and interaction
//! feature construction, SMOTE oversampling, CART/forest/boosting/linear
//! learners, out-of-fold stacking, evaluation metrics and the experiment
//! orchestration that ties them together. File formats, the command line and
//! figure rendering live in the `hmdim` companion crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod formula;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod resample;
pub mod rng;

pub use dataset::{DatasetTable, FoldPlan, SplitPlan, NUM_CLASSES};
pub use error::{Error, Result};
pub use models::{Model, Probabilities};
