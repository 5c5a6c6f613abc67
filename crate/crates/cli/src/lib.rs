//! Command-line harness: configuration, the benchmark pipeline and the
//! output-directory contract.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod report;

pub use config::{DataSource, Overrides, RunConfig, SyntheticSource, TuneConfig};
pub use error::{CliError, CliResult};
pub use output::{RunManifest, MANIFEST_JSON};
pub use pipeline::{run_bench, run_eda, run_ingest, run_synth, run_tune, Results, RESULTS_JSON};
pub use report::run_report;
