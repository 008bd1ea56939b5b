#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dsp;
pub mod pulse;
pub mod signal;
pub mod synth;
pub mod vitals;
