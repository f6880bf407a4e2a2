//! Experiment harness for `onephase-core`: configuration, suites, reports
//! and the field-file tools behind the `onephase` binary.

pub mod config;
pub mod error;
pub mod fields;
pub mod oracle;
pub mod report;
pub mod suites;
pub mod tools;

pub use config::{ConfigFile, ExperimentConfig, Suite};
pub use error::{HResult, HarnessError};
pub use report::{Report, Row, SuiteReport};
