//! File formats, report writers, the scenario simulator and the reference
//! oracle around `gazemap-core`.

pub mod cli;
pub mod config;
pub mod gaze_log;
pub mod mask_file;
pub mod meta;
pub mod oracle;
pub mod report;
pub mod scenario;
