use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("instance data contains a non-finite value")]
    NonFiniteData,
    #[error("rows of A are linearly dependent (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("factorization of A A^T failed")]
    FactorizationFailure,
    #[error("{0} did not converge")]
    ConvergenceFailure(&'static str),
    #[error("step sizes violate tau*sigma*||A||^2 <= 1 (product = {product:e})")]
    InvalidStepSizes { product: f64 },
    #[error("normalized duality gap bisection did not reach tolerance")]
    BisectionFailure,
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("basis matrix is singular")]
    SingularBasis,
    #[error("certificate is degenerate (some x*_B or s*_N is zero)")]
    DegenerateCertificate,
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
    #[error("objective projection onto Null(A) is zero, so mu_p is undefined")]
    ZeroObjectiveProjection,
    #[error("weights must be positive")]
    NonPositiveWeights,
    #[error("problem too large for exhaustive oracle ({0})")]
    TooLarge(String),
    #[error("no feasible basic solution exists")]
    Infeasible,
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("{} optimal bases; optimum is not unique", bases.len())]
    MultipleOptima { bases: Vec<Vec<usize>> },
    #[error("support never stabilized at the optimal basis (stage1 = {stage1}, stage2 = {stage2})")]
    NeverStabilized { stage1: usize, stage2: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("a certificate is required: {0}")]
    MissingCertificate(String),
    #[error("unsupported output format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
