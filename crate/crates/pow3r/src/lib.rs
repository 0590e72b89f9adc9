//! Policy-aware rubric reward toolkit.
//!
//! Rubric-scored RL rewards fold many judged criteria into one scalar per
//! rollout. This crate implements the pieces of that pipeline: dataset
//! ingestion, per-criterion judging (simulated or remote LLM), the four
//! reward constructions with group-relative advantages, the bounded dynamic
//! factor engine that reallocates within-category weight toward currently
//! contrastive criteria, a rubric-pressure diagnostic, and a surrogate-policy
//! simulator for matched-compute comparisons.

pub mod aggregate;
pub mod cli;
pub mod diagnostic;
pub mod digest;
pub mod error;
pub mod factor;
pub mod judge;
pub mod manifest;
pub mod rubric;
pub mod simulate;

pub use error::{Error, Result};
