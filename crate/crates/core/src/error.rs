use thiserror::Error;

use crate::dist::Axis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("marginal CDF on the {axis} axis has a flat region; equipartition quantiles are not unique")]
    FlatMarginal { axis: Axis },

    #[error("{axis} axis has {distinct} distinct coordinates, need at least {needed}")]
    InsufficientDistinct {
        axis: Axis,
        distinct: usize,
        needed: usize,
    },

    #[error(
        "entry ({k},{l}) would enumerate {count} grids, above the limit {limit}; lower candidate_m or the budget"
    )]
    EnumerationTooLarge {
        k: usize,
        l: usize,
        count: u128,
        limit: u64,
    },

    #[error("characteristic matrix key sets differ")]
    KeyMismatch,

    #[error("characteristic matrix is empty")]
    EmptyMatrix,
}
