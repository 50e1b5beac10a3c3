//! Low-rank plus sparse separation of contrast-enhanced ultrasound movies:
//! the L+S proximal solvers, the unfolded convolutional network that learns
//! them, a CEUS simulator, classical clutter filters, training, metrics and I/O.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod io;
pub mod metrics;
pub mod net;
pub mod prox;
pub mod sim;
pub mod solver;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use net::{forward, CoronaNetwork};
pub use solver::{solve, SolverConfig};
pub use tensor::{CMatrix, MovieShape, MovieTensor, C64};
