//! Local Whittle wavelet estimation of the memory parameter of long-memory
//! time series.

pub mod asymptotics;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod io;
pub mod synthesis;
pub mod wavelet;

pub use error::{Error, Result};
