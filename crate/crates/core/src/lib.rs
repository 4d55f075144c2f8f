// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod grids;
pub mod quad_rules;
pub mod special_fn;
pub mod sum;
pub mod scenarios;
pub mod mc_engine;
pub mod bench;
pub mod cli;
