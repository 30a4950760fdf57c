//! Expected-utility-optimal derivative selection in a two-asset
//! Black-Scholes market.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod csv;
pub mod error;
pub mod evaluation;
pub mod market;
pub mod numerics;
pub mod pricing;
pub mod selection;

pub use error::{Error, Result};
