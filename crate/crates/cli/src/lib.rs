//! Configuration, figure recipes and artifact output behind the `wgarray` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod recipes;
pub mod run;
