//! Thermodynamics of an immiscible liquid / miscible gas-vapor mixture,
//! entropy-maximizing equilibrium solvers, and first-order finite-volume
//! solvers for the homogeneous equilibrium and relaxation Euler models.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod eos;
pub mod equilibrium;
pub mod error;
pub mod fv1d;
pub mod hem;
pub mod hrm;
pub mod mixture;

pub use error::{Error, Result};
