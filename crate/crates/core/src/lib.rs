#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coefficients;
pub mod config;
pub mod dynamics;
pub mod estimation;
pub mod integrate;
pub mod multipole;
pub mod multiscale;
pub mod output;
pub mod poly;
