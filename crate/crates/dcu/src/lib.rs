//! Scenario runner for `dcu-core`: configuration files, the solve/verify
//! pipeline, CSV reports and run manifests.

pub mod config;
pub mod error;
pub mod expr;
pub mod manifest;
pub mod report;
pub mod run;
pub mod tabulated;

pub use config::{load_scenario, parse_scenario, Scenario};
pub use error::RunError;
pub use manifest::{compare, Manifest, ManifestDiff};
pub use run::{run, with_threads, Headline, RunOutcome};
