//! Critical-care prediction benchmark engine.
//!
//! The pipeline runs ingestion of eICU-shaped tables, cohort selection and
//! task labelling, hourly-grid preprocessing, from-scratch sequence models
//! (linear, one-hidden-layer ANN, BiLSTM) with four task heads, and a
//! cross-validated evaluation protocol with confidence intervals and
//! significance tests. A synthetic generator produces schema-compatible data
//! so everything runs without credentialed access.

pub mod cohort;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod ingest;
pub mod neural;
pub mod phenotype;
pub mod preprocess;
pub mod schema;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
