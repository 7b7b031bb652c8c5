//! Voxel-wise encoding models over image-caption word-state features.
//!
//! Caption decoder states are max-pooled into fixed-size image features,
//! sparse per-voxel linear models are fitted with greedy pursuit (ROMP by
//! default), and models are evaluated, compared and interpreted through
//! Pearson correlation and word attribution.

pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod interchange;
pub mod interpretation;
pub mod par;
pub mod solver;
pub mod synth;

pub use error::{Error, ErrorCategory, FormatError, Result};
