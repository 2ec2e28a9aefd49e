//! File formats, checkpoints, experiment drivers and the command-line
//! front end for `corefbench-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod datasets;
pub mod records;
pub mod report;
pub mod runner;

pub use checkpoint::Checkpoint;
pub use config::CliConfig;
pub use records::RunRecord;
