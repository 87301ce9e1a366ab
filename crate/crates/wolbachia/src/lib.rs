//! File formats, parallel sweeps, the `wolbachia` CLI and the HTTP service
//! built on [`wolbachia_core`].

pub mod analysis;
pub mod check;
pub mod cli;
pub mod error;
pub mod formats;
pub mod params;
pub mod service;
pub mod sweep;

pub use error::{AppError, AppResult};
