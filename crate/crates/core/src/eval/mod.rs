//! Evaluation harness: error injection with recall measurement, and the
//! metadata degradation benchmark for the matching engine.

pub mod corpus;
pub mod degrade;
pub mod inject;
