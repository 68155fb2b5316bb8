//! Domain generalization through object-level matching.
//!
//! The crate generates multi-domain datasets from a structural causal model
//! (or rotated glyph images), builds cross-domain match matrices, trains small
//! dense networks with match-regularised objectives (including contrastive
//! match learning with iterative refresh), and evaluates both accuracy and the
//! quality of the learned matches.
//!
//! Start with the `examples/` directory: every capability has a runnable
//! example.

pub mod data;
mod error;
pub mod experiment;
pub mod linalg;
pub mod losses;
pub mod matchstore;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
