//! Subcommand implementations. Each returns the text for stdout and the
//! files to write; nothing touches the filesystem until the caller decides.

mod family;
mod flow;
mod ot;
mod surface;
mod verify;

pub use family::family;
pub use flow::{closed_form_fields, flow, flow_many};
pub use ot::ot;
pub use surface::{surface, surface_file_stem};
pub use verify::{suite_config, verify};

use crate::output::OutputSet;

#[derive(Debug, Default)]
pub struct CommandOutput {
    pub stdout: String,
    pub files: OutputSet,
    /// Reported as a non-zero exit status.
    pub failed: bool,
}
