//! Run-directory I/O and presentation.

pub mod analysis;
pub mod chart;
pub mod jsonl;
pub mod table;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use analysis::{
    analyze_dir, analyze_transcripts, compare_runs, load_run, render_report, write_comparison, write_run_artifacts,
    AnalysisOptions, Comparison, RunAnalysis, RunManifest,
};
pub use chart::{render_distribution_chart, ChartError, ChartGroup, ChartScale, ChartSpec};
pub use jsonl::{read_jsonl, write_jsonl, JsonlRead, JsonlWriter, LineError};
pub use table::{comparison_table, fmt2, metrics_table, paired};

/// File names inside a run directory.
pub mod files {
    pub const RUN_MANIFEST: &str = "run.json";
    pub const PERSONAS: &str = "personas.jsonl";
    pub const TRANSCRIPTS: &str = "transcripts.jsonl";
    pub const ABORTED: &str = "aborted.jsonl";
    pub const METRICS_CSV: &str = "metrics.csv";
    pub const METRICS_JSONL: &str = "metrics.jsonl";
    pub const STATS_JSON: &str = "stats.json";
    pub const CHARTS_DIR: &str = "charts";
    pub const REPORT_MD: &str = "report.md";
    pub const COMPARISON_CSV: &str = "comparison.csv";
    pub const COMPARISON_MD: &str = "comparison.md";
    pub const COMPARISON_JSON: &str = "comparison.json";
    pub const REPLAY_CACHE: &str = "replay.jsonl";
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}: no records")]
    Empty(PathBuf),
    #[error("serialization failed: {0}")]
    Json(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

impl ReportError {
    pub fn io(path: &Path, error: std::io::Error) -> ReportError {
        ReportError::Io { path: path.to_path_buf(), error }
    }
}
