//! Experiment harness for the low-rank experts learners: JSON-configured
//! seeded runs with CSV outputs, an invariant checker, loss-file I/O, and SVG
//! regret plots. The `lre` binary is a thin command-line front end.

pub mod config;
pub mod error;
pub mod plot;
pub mod runner;
pub mod stream_io;
pub mod verify;

pub use error::{HarnessError, Result};
