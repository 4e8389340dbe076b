//! Spectral laboratory for the good Boussinesq equation
//! `u_tt + u_xxxx − u_xx − (u²)_xx = 0` with quasi-periodic initial data.
//!
//! Fourier coefficients `c(t, n)` over a truncated lattice `|n| ≤ N` in `Z^ν`
//! are advanced by Picard iteration on the Duhamel form of the mode ODEs,
//! cross-checked against an RK4 integrator, a tree-indexed series expansion,
//! decay and contraction bounds, and a spectral residual.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod combinatorics;
pub mod config;
pub mod error;
pub mod evolution;
pub mod io;
pub mod lattice;
pub mod run;
pub mod synthesis;

pub use error::{Error, Result};
pub use lattice::{CoefficientField, DecayEnvelope, FrequencySystem, MultiIndex, C64};
