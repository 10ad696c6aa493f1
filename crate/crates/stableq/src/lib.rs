//! File formats, mesh export and the experiment harness around
//! [`stableq_core`].

pub mod error;
pub mod harness;
pub mod mesh;
pub mod persist;

pub use error::{CliError, ExitCode};
pub use stableq_core as core;
