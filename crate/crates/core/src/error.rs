use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is closer to L1 than to L2")]
    WrongBranch,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("kernel is not one-dimensional (numerical rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },
    #[error("difference of the split endpoints is not rank one")]
    NotRankOne,
    #[error("parent matrix is not the stated convex combination (residual {residual:.3e})")]
    NotOnSegment { residual: f64 },
    #[error("split mass {requested} exceeds atom weight {available}")]
    MassExceeded { requested: f64, available: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("cell budget exceeded: {cells} cells > {budget}")]
    CellBudgetExceeded { cells: usize, budget: usize },
    #[error("operation needs n >= 2")]
    DimensionTooSmall,
    #[error("piecewise-linear profile must have slopes +-1: {0}")]
    BadSlopes(String),
    #[error("one-form is not closed: residual {residual:.3e} > {threshold:.3e}")]
    NotClosed { residual: f64, threshold: f64 },
    #[error("map is not area preserving: max |det - 1| = {defect:.3e}")]
    NotAreaPreserving { defect: f64 },
    #[error("point is not a differentiability point: {0}")]
    NotDifferentiableHere(String),
    #[error("io: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::WrongBranch => "wrong_branch",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NotRankOne => "not_rank_one",
            Error::NotOnSegment { .. } => "not_on_segment",
            Error::MassExceeded { .. } => "mass_exceeded",
            Error::Singular => "singular",
            Error::CellBudgetExceeded { .. } => "cell_budget_exceeded",
            Error::DimensionTooSmall => "dimension_too_small",
            Error::BadSlopes(_) => "bad_slopes",
            Error::NotClosed { .. } => "not_closed",
            Error::NotAreaPreserving { .. } => "not_area_preserving",
            Error::NotDifferentiableHere(_) => "not_differentiable_here",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
