//! File formats, command-line front end and benchmark harness around `sci-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod table;

pub use config::RunConfig;
pub use error::{AppError, AppResult};
