//! Orthogonal-array and factorial experiment designs, their range analysis
//! and ANOVA, and tuning runs over trainer settings.

mod analysis;
mod design;
mod tuning;

use thiserror::Error;

pub use analysis::{anova, combination_label, f_upper_p, factor_letter, range_analysis, AnovaRow, AnovaTable, FTest, FactorRange, RangeAnalysis};
pub use design::{make_design, DesignFile, DesignKind, DesignMatrix, Factor, L16_COLUMNS, L9_COLUMNS};
pub use tuning::{analyse_runs, apply_factor, config_for_run, report_to_csv, run_tuning, RunRecord, TuningReport};

#[derive(Debug, Error)]
pub enum DoeError {
    #[error("factor {factor}: {reason}")]
    InvalidFactor { factor: String, reason: String },
    #[error("{kind:?} holds at most {max_factors} factors of exactly {levels} levels")]
    Capacity { kind: DesignKind, max_factors: usize, levels: usize },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("expected {expected} responses, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("response of run {run} is not finite")]
    NonFiniteResponse { run: usize },
    #[error("design is not balanced; range analysis and ANOVA need equal level counts")]
    Unbalanced,
    #[error("budget of {budget} runs is below the design's {runs} runs")]
    Budget { budget: usize, runs: usize },
    #[error("runs failed: {}", failed_summary(.runs))]
    FailedRuns { runs: Vec<RunRecord> },
    #[error("unknown factor {0:?}; expected batch_size, learning_rate, epochs, conv_layers, margin or mu")]
    UnknownFactor(String),
    #[error("report: {0}")]
    Report(String),
}

fn failed_summary(runs: &[RunRecord]) -> String {
    runs.iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("#{} ({e})", r.run_id)))
        .collect::<Vec<_>>()
        .join(", ")
}

impl From<csv::Error> for DoeError {
    fn from(e: csv::Error) -> Self {
        DoeError::Report(e.to_string())
    }
}
