//! Configuration, method dispatch, sweeps, verification suites, metric
//! emission and the command-line front end.

pub mod cli;
pub mod config;
pub mod methods;
pub mod output;
pub mod sweep;
pub mod verify;
