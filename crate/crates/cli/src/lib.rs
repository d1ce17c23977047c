//! Command-line driver and HTTP/WebSocket service for porgysim simulations.

pub mod commands;
mod error;
pub mod service;

pub use error::CliError;
