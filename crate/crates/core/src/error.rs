use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("Newton continuation diverged for orbit {orbit} at eps = {eps}")]
    NewtonDivergence { orbit: usize, eps: f64 },
    #[error("splitting iteration did not converge at ({q}, {p})")]
    NonConvergence { q: f64, p: f64 },
    #[error("quadrature not converged: doubling the order changed the value by {0:e}")]
    QuadratureNotConverged(f64),
    #[error("eigensolver did not converge (active index {0})")]
    NoConvergence(usize),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("aliasing detected: relative energy {0:e} beyond the retained modes")]
    AliasingDetected(f64),
    #[error("symbol modes exceed the admissible cutoff ({modes} > {cutoff})")]
    SymbolAliasing { modes: i64, cutoff: i64 },
    #[error("no spectral gap: an eigenvalue lies within {0:e} of a contour")]
    NoGap(f64),
    #[error("band annuli overlap after inflation")]
    OverlappingAnnuli,
    #[error("cardinality mismatch: {0} vs {1}")]
    CardinalityMismatch(usize, usize),
    #[error("requested radius {requested} is below the reliability radius {reliable}")]
    UnreliableRegion { requested: f64, reliable: f64 },
    #[error("grid too coarse: spacing {spacing} exceeds {limit}")]
    GridTooCoarse { spacing: f64, limit: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("expansion condition violated: {0}")]
    NotExpanding(String),
    #[error("quadratic form is not positive")]
    NonPositiveForm,
    #[error("invalid configuration at `{path}`: {reason}")]
    ConfigInvalid { path: String, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
