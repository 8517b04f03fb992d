//! File formats, evaluation drivers and command-line plumbing around
//! `gwb-core`.

// `!(x > 0.0)` is the NaN-rejecting form used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod json;
pub mod panel;
pub mod report;
pub mod seeds;
pub mod selftest;
pub mod stage1;
pub mod stage2;

pub use error::{AppError, Result};
