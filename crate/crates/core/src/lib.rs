//! Explainable random-forest pipeline for 30-day ICU readmission risk.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`data`]: typed tables, CSV ingestion, one-hot encoding, stratified
//!   splitting and a synthetic cohort generator with known ground truth.
//! - [`preprocess`]: cohort filters, missingness-based column dropping,
//!   imputation, standardisation and ratio-controlled undersampling.
//! - [`learner`]: CART trees and a bootstrap random forest with per-node
//!   cover counts and a versioned text model format.
//! - [`evaluation`]: threshold and ranking metrics, stratified k-fold
//!   cross-validation and greedy forward feature selection.
//! - [`stats`]: two-group cohort comparisons (chi-squared, rank-sum).
//! - [`diagnostics`]: calibration curves, slope/intercept, the ICI family
//!   and positive likelihood-ratio sweeps.
//! - [`explain`]: exact path-dependent TreeSHAP with a brute-force oracle.
//! - [`plot`]: static SVG renderings of the curves above.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod learner;
pub mod matrix;
pub mod plot;
pub mod preprocess;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::Matrix;
