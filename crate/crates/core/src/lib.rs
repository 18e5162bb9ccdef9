//! Cross-layer soft-error resilience exploration.
//!
//! Per-flip-flop vulnerability profiles feed a catalog of circuit, logic,
//! architecture and software techniques; the explorers pick combinations
//! that hit SDC/DUE improvement targets at minimum area, power and energy.

// `!(x >= 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod dependence;
pub mod doc;
pub mod error;
pub mod eval;
pub mod explore;
pub mod model;
pub mod parity;
pub mod sim;
pub mod synth;

pub use doc::{Document, TOOL_VERSION};
pub use error::{Error, Result};
pub use model::{
    always_vanish_set, vulnerability_rank, Benchmark, BenchmarkCounts, DesignModel, FfId, FlipFlop, Metric,
    OutcomeCounts, Position, Stage, VulnerabilityProfile,
};
