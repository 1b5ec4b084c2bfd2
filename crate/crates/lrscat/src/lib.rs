//! Numerical toolkit for classical long-range scattering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod flow;
pub mod hj;
pub mod model;
pub mod modifiers;
pub mod numerics;
pub mod ode;
pub mod propagate;
pub mod scatmap;
pub mod smatrix;
pub mod verify;
pub mod wavemaps;
