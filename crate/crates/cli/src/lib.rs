//! Front end for the `gmus` binary: CSV ingestion, configuration and the
//! `fit`, `cv`, `elbow`, `simulate` and `convergence` commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;

pub use config::RunConfig;
pub use io::load_dataset;
