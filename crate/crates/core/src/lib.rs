//! Gradient-boosted decision trees for cross-sectional ranking, with a
//! LambdaRank-style objective weighted by each pair's contribution to the
//! Spearman rank correlation (Rank IC).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod gbdt;
pub mod objectives;
pub mod rankcore;
pub mod simulate;

pub use error::{Error, Result};
