//! Joint dynamic scoring of buying groups ("accounts") and their individual
//! members from activity logs.
//!
//! A three-level hierarchical attention network reads each member's weekly
//! activity sequences over a rolling four-week window and predicts, for every
//! week, the probability that the account converts in the following week.
//! Per-individual scores are recovered below the aggregation step, so account
//! and member dynamics are scored jointly. The crate also ships the data
//! pipeline, six aggregation strategies, two baselines, a synthetic benchmark
//! generator, training, and evaluation.

pub mod baselines;
pub mod cli;
pub mod datamodel;
pub mod error;
pub mod eval;
pub mod han;
pub mod ingest;
pub mod kv;
pub mod nn;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
