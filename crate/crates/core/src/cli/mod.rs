//! Configuration parsing, experiment dispatch and output writing for the
//! `fv-lab` binary.

mod config;
mod dispatch;

pub use config::{parse_config, validate, ExperimentConfig, ExperimentKind, RawConfig, DEFAULT_OUT};
pub use dispatch::{
    default_query_points, dispatch, run, run_with_threads, write_outputs, Outcome, EXIT_ERROR, EXIT_FAIL, EXIT_PASS,
};
