//! Scenario-driven front end for the `colombeau` library.
//!
//! The binary reads a JSON scenario, runs one of four checks (growth
//! classification, operator composition, truncated operator exponential,
//! Hermite coefficient analysis), and writes a deterministic `report.json`
//! plus CSV series into an output directory.

pub mod report;
pub mod runner;
pub mod scenario;
