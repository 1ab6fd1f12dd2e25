use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event {index}: pixel ({x}, {y}) outside {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u32,
        height: u32,
    },

    #[error("event {index}: polarity {value} not in {{-1, +1}}")]
    InvalidPolarity { index: usize, value: i8 },

    #[error("event {index}: timestamp {t} decreases below {prev}")]
    NonMonotoneTimestamps { index: usize, prev: f64, t: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("disparity must be positive, got {d}")]
    NonpositiveDisparity { d: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no pixels to compare")]
    EmptyComparison,

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
