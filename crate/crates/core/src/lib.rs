//! Self-training with hardness sampling for transductive zero-shot learning.
//!
//! The crate is organised around the pipeline:
//!
//! - [`dataset`]: the zero-shot data model, file interchange and a seeded
//!   synthetic benchmark generator;
//! - [`models`]: pluggable base classifiers (ridge embedding, Gaussian
//!   generative surrogate);
//! - [`hardness`]: class-frequency hardness metrics and hard-class sampling;
//! - [`prior`]: the classification/clustering consistency prior estimator;
//! - [`selftrain`]: the iterative self-training driver;
//! - [`eval`]: metrics and oracle-label diagnostics.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod hardness;
pub mod linalg;
pub mod matrix;
pub mod models;
pub mod prior;
pub mod rng;
pub mod selftrain;

pub use error::{Error, Result};
