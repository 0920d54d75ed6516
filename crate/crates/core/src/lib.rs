//! Phasor-domain (RMS) dynamic simulation and angle-stability analysis for
//! networks with synchronous machines and grid-forming VSM converters.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod devices;
pub mod dynsim;
pub mod powergrid;
pub mod smallsignal;
pub mod studies;
