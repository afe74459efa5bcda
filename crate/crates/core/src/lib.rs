//! Dual-path neural operators.
//!
//! A residual stack and a densely connected stack of operator blocks run
//! side by side on the same lifted input and are merged by a small
//! pointwise network. Blocks are either Fourier layers (FNO) or MLPs in a
//! DeepONet trunk. The crate also generates the Burgers, Darcy and
//! Navier-Stokes benchmark datasets and trains/evaluates the models.

pub mod autodiff;
pub mod blocks;
pub mod dual_path;
pub mod error;
pub mod io;
pub mod model;
pub mod nn;
pub mod pde;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
