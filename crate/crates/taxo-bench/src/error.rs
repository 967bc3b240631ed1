use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("record '{record}': {detail}")]
    InvariantViolation { record: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("target size {target} exceeds the {available} nodes of the source taxonomy")]
    TargetTooLarge { target: usize, available: usize },
    #[error("target size must be at least 1")]
    ZeroTarget,
    #[error("empty size band: min {min} > max {max}")]
    EmptyBand { min: usize, max: usize },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("every record of run '{run_id}' failed; first error: {first}")]
    AllRecordsFailed { run_id: String, first: String },
}

impl RunError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
