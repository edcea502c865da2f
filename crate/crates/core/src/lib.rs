//! Special-relativistic Kepler dynamics, generalized Kepler force laws and the
//! energy-dependent clock change that maps one onto the other.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod analytic;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod model;
pub mod reparam;
pub mod vector;
