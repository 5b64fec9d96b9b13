pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
mod io_util;
pub mod kernels;
pub mod model;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
