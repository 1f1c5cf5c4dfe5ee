use thiserror::Error;

/// One Newton iteration of the probit fit, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("quadrature on [{a}, {b}] exceeded recursion depth {depth} before reaching tolerance")]
    QuadratureDepth { a: f64, b: f64, depth: usize },

    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("probit choices are perfectly separated")]
    Separation { trace: Vec<IterRecord> },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        trace: Vec<IterRecord>,
    },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error("missing cell: {0}")]
    MissingCell(String),

    #[error("assignment off the observed support in {} cell(s)", .cells.len())]
    OffSupport { cells: Vec<OffSupportCell> },

    #[error("collinear regressors: {0}")]
    Collinear(String),

    #[error("identified set is empty: {0}")]
    EmptySet(String),

    #[error("crossing violation: {0}")]
    Crossing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OffSupportCell {
    pub cell: String,
    pub assigned: f64,
    pub nearest_observed: Option<f64>,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
