//! WER scoring, domain statistics, experiment orchestration and reports.

mod experiment;
mod report;
mod stats;
mod wer;

pub use experiment::{
    read_references, run_experiment, select_config, synth_dataset, DatasetSpec, ExperimentResults,
    ExperimentSpec, GridSpec, LmSpec, ModelInfo, ModelKind, ModelSpec, Recognizer, ResultCell,
    SearchSpec, Split, Unit, SCHEMA,
};
pub use report::{
    emit_report, format_count, format_wer, Report, ReportFormat, Table, WerRow, WerTable,
};
pub use stats::{domain_stats, CorpusInfo, DomainCell, DomainStats, LmRow};
pub use wer::{
    align, compute_wer, error_counts, error_profile_delta, EditOp, ErrorCounts, UtteranceErrors,
    WerReport,
};
