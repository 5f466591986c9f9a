//! Experiment runner for the `armagg` library: configuration, report
//! formatting and Monte-Carlo self-checks.

pub mod config;
pub mod io;
pub mod mc;
pub mod run;
