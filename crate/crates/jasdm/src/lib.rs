//! Monte Carlo studies, file formats and the command-line front end for
//! [`jasdm_core`].

pub mod analysis;
pub mod cli;
pub mod config;
pub mod manifest;
pub mod report;

use jasdm_core::{ModelError, NoiseError, SchemeError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("{0}")]
    Usage(String),
}
