//! Event-based scoring of per-sample decisions, continuous filtering, and
//! corpus-level reports.

mod inference;
mod report;
mod scoring;

pub use inference::{collision_probabilities, run_inference};
pub use report::{
    ablation_run, cf_sweep, comparison_table_csv, infer_corpus, long_table_csv, parse_sweep_csv,
    score_traces, series_csv, split_table_csv, sweep_csv, sweep_svg, AblationColumn, AblationOptions,
    AblationResult, CfSweepRow, DetectionReport, ScoredTrace, SplitScore, LONG_HEADER, REPORT_LEVELS,
    SPLIT_HEADER,
};
pub use scoring::{
    compute_report, continuous_filter, extract_intervals, CollisionInterval, EventScore, ScoringRules,
};
