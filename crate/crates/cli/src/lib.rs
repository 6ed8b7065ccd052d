//! Scenario-file front end for `qwave-core`: JSON scenarios in, CSV and
//! JSON results out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod run;
pub mod scenario;
pub mod verify;

pub use error::{CliError, CliResult};
pub use io::Bundle;
pub use scenario::{LoadedScenario, Overrides};
