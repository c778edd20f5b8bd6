//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // -- compositions --
    #[error("row {0} sums to zero and cannot be closed")]
    RowAllZero(usize),
    #[error("negative entry at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize },
    #[error("row {row} sums to {sum}, which is not 1 within tolerance")]
    RowSumMismatch { row: usize, sum: f64 },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("data contain a zero entry; alpha must be strictly positive (got {0})")]
    ZeroWithNonpositiveAlpha(f64),
    #[error("alpha {0} lies outside [-1, 1]")]
    AlphaOutOfRange(f64),
    #[error("row {0} lies outside the domain of the inverse transformation")]
    OutOfDomain(usize),
    #[error("log-ratio transformation requires strictly positive entries (row {0})")]
    ZeroEntry(usize),

    // -- kmeans --
    #[error("at least two rows are required, got {0}")]
    TooFewRows(usize),
    #[error("number of clusters {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("could not re-seed an empty cluster")]
    EmptyClusterUnrecoverable,

    // -- validity --
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("unknown validity index name {0:?}")]
    UnknownIndexName(String),
    #[error("labels have length {labels} but data have {rows} rows")]
    LengthMismatch { labels: usize, rows: usize },

    // -- gpcm --
    #[error("unknown covariance model {0:?}")]
    UnknownModel(String),
    #[error("component {0} degenerated during estimation")]
    DegenerateComponent(usize),
    #[error("observation {0} has zero density under every component")]
    NumericalUnderflowUnrecoverable(usize),
    #[error("every EM start failed: {0}")]
    AllStartsFailed(String),
    #[error("need more observations ({n}) than components ({k})")]
    TooFewObservations { n: usize, k: usize },

    // -- selection --
    #[error("invalid alpha grid: {0}")]
    InvalidGrid(String),
    #[error("every grid cell failed")]
    AllCellsFailed,

    // -- simulation --
    #[error("Dirichlet parameters must be strictly positive (index {0})")]
    NonpositiveParameter(usize),
    #[error("invalid mixture definition: {0}")]
    InvalidSpec(String),
    #[error("density is only defined on the interior of the simplex")]
    BoundaryPoint,
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EmptyClusterUnrecoverable
                | Error::DegenerateComponent(_)
                | Error::NumericalUnderflowUnrecoverable(_)
                | Error::AllStartsFailed(_)
                | Error::AllCellsFailed
        )
    }
}
