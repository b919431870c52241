//! Stage-level fairness auditing for tabular classification pipelines.
//!
//! A pipeline is fitted twice per repeat: once as declared and once with a
//! single stage removed or replaced. Comparing the two sets of test
//! predictions instance by instance attributes fairness changes to that
//! stage.

pub mod classifiers;
pub mod config;
pub mod data;
pub mod datasets;
pub mod error;
pub mod frame;
pub mod harness;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod stagefair;
pub mod transformers;

pub use error::{Error, Result};
