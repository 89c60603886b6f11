//! File formats and report plumbing behind the `uqtmlab` command-line
//! driver: textual machine definitions, textual complex matrices, input
//! state specifications and structured JSON/CSV experiment reports.

pub mod input_spec;
pub mod machine_file;
pub mod matrix_file;
pub mod report;
