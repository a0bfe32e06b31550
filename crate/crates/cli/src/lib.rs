//! Scenario driver for the numerical laboratory: configuration, frozen
//! constants, scenario bodies, reports, and deterministic table emission.
//!
//! The library layer is what the test suite exercises; the `loglab` binary
//! is a thin argument-parsing shell over `run_scenario` + `emit_tables`.

pub mod config;
pub mod emit;
pub mod registry;
pub mod report;
pub mod scenarios;

pub use config::ScenarioConfig;
pub use emit::emit_tables;
pub use registry::{ConstantsRegistry, ConstantsStore};
pub use report::{Assertion, Curve, ScenarioReport};
pub use scenarios::{run_scenario, ALL_SCENARIOS};
