//! Command implementations behind the `spin-dce` binary.

pub mod cli;
pub mod commands;
pub mod output;
pub mod presets;
pub mod svg;
