//! Analog-computer synthesis and simulation of integro-differential equations
//! with memristive integrators.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compiler;
pub mod elements;
pub mod expr;
pub mod netlist;
pub mod oracle;
pub mod solver;
pub mod tolerance;
pub mod waveform;
