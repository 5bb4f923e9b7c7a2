//! Metrics, cross-validation and the experiment drivers behind the CLI.

mod analysis;
mod cv;
mod metrics;
mod output;
mod report;

pub use analysis::{
    label_pairs, mean_eigen_error, spearman, spectra_analysis, sweep_alpha, verify_dataset,
    SpectraOutcome, SpectraRow, SweepOutcome, SweepRow,
};
pub use cv::{
    fold_gist_config, fold_oracle, fold_split, instance_seed, kfold_indices, run_cv, run_fold,
    CvConfig, CvOutcome, FoldOutcome, FoldSplit, GIST_NAME, IRAND_NAME,
};
pub use metrics::{
    fidelity, fidelity_from_classes, ged, sparsity, validity, validity_from_classes, FEATURE_TOL,
};
pub use output::{
    fold_csv_name, write_evaluation, write_spectra_csv, write_sweep_csv, write_theorem_csv,
    write_theorem_json, EvaluationFiles, AGGREGATE_FILE, COUNTERFACTUALS_FILE,
};
pub use report::{
    csv_reader, write_rows_csv, CounterfactualRecord, GraphRecord, Metadata, MetricReport,
    MetricRow, Stat, FIDELITY, GED, ORACLE_CALLS, RUNTIME_MS, SPARSITY, VALIDITY,
};
