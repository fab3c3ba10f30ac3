//! Desk-scale KNX building-automation security lab.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod attack;
pub mod bus;
pub mod detector;
pub mod experiment;
pub mod hvac;
pub mod scenario;
