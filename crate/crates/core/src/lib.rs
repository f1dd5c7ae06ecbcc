//! Two (or more) coupled fluid-limit limit order books driven by fractional
//! reaction-diffusion, with tools to measure the correlation between their
//! price paths across time scales and to calibrate the model to data.

pub mod book;
pub mod calibration;
pub mod correlation;
pub mod error;
pub mod facts;
pub mod ingest;
pub mod kernel;
pub mod lattice;
pub mod nufft;
pub mod optim;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
