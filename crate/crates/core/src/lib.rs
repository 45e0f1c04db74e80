//! IMT-2020 system-level compliance simulator.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod channel;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod link;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod traffic;

pub use error::{Error, Result};
