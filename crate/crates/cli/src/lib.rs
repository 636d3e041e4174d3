//! Command-line front end: job configuration, coefficient files and C
//! emission for the `hornfit` binary.

pub mod coeffs;
pub mod config;
pub mod emit;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Library(#[from] hornfit::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}
