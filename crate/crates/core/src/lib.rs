// `!(x > 0.0)` is on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csp;
pub mod dss;
pub mod geo;
pub mod mission;
pub mod moea;
pub mod plan;
pub mod sim;
