//! Numerical laboratory for Carleman estimates of the cubic complex
//! Ginzburg-Landau equation `y_t - (1+ib) Δy + (1+ic)|y|^2 y = f`.

pub mod banded;
pub mod carleman;
pub mod cli;
pub mod error;
pub mod grid;
pub mod identity;
pub mod numerics;
pub mod operator;
pub mod solver;
pub mod stability;
pub mod weights;

pub use error::{Error, Result};
