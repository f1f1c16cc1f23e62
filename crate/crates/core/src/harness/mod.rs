//! Data ingestion, output files, configuration, and experiment pipelines.

pub mod config;
pub mod io;
pub mod pipelines;
pub mod report;
pub mod source;

pub use io::{load_csv, load_idx};
pub use pipelines::{
    run_continual, run_features, run_stream, run_summarization, ContinualReport, ContinualSpec, FeatureReport,
    FeatureSpec, MemoryPolicy, Scenario, StreamReport, StreamSpec, SummarizationReport, SummarizeSpec, TaskSplit,
};
pub use report::{emit_report, write_atomic, RunArtifacts};
