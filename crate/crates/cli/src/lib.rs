//! Command-line front end for the hidden-Markov degradation filtering
//! library: simulation studies, parameter estimation, logbook preprocessing,
//! and fleet-wide detection pipelines.

pub mod commands;
pub mod config;
pub mod report;
