//! Command-line front end: verification suites, samplers and experiments.

pub mod app;
pub mod report;
pub mod suites;
