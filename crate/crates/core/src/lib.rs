#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Directed search with segmented seller markets.

pub mod designer;
pub mod efficiency;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod meeting;
pub mod numeric;
pub mod oracle;
pub mod planner;

pub use error::{Error, Result};
