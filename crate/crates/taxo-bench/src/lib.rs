//! Benchmark harness: datasets, sub-taxonomy sampling, experiment runs over
//! the method grid, result tables and case-study dumps.

pub mod case_study;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod sample;
pub mod scenarios;
pub mod tables;

pub use case_study::side_by_side;
pub use dataset::{load_dataset, parse_dataset, record_from_tsv, save_dataset, DatasetRecord, Split};
pub use error::{DatasetError, RunError, SampleError};
pub use experiment::{
    few_shot_demos, run_experiment, Averaging, BackendSpec, Cell, ExperimentOutcome, Method, RecordResult,
    RunConfig, RunManifest, SamplingConfig, ScorerSpec, Shots, Timing,
};
pub use sample::{sample_grid, sample_in_band, sample_record, sample_subtaxonomy, synthetic_tree, DEFAULT_REPEATS};
pub use tables::{AblationRow, AblationTable};
