use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tau = {tau} is not admissible: distance {distance:.3e} to Spec(-Δ) below guard {guard:.3e}")]
    NotAdmissible { tau: f64, distance: f64, guard: f64 },

    #[error("resonance: |tau| = mu = {0}")]
    Resonance(f64),

    #[error("geodesic exceeded maximum length {max_length} without leaving the manifold")]
    GeodesicTooLong { max_length: f64 },

    #[error("simplicity check failed: {0}")]
    NotSimple(String),

    #[error("Neumann series contraction factor {factor:.4} exceeds limit {limit}")]
    Contraction { factor: f64, limit: f64 },

    #[error("{method} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Dirichlet problem near-singular: smallest singular value estimate {estimate:.3e} below guard {guard:.3e}")]
    NearSingular { estimate: f64, guard: f64 },

    #[error("probe Gram matrix ill-conditioned: condition number {0:.3e}")]
    IllConditionedProbes(f64),

    #[error("remainder budget exceeded: {0}")]
    Budget(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Short machine-readable kind tag, used in error records written to disk.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotAdmissible { .. } => "not_admissible",
            Error::Resonance(_) => "resonance",
            Error::GeodesicTooLong { .. } => "geodesic_too_long",
            Error::NotSimple(_) => "not_simple",
            Error::Contraction { .. } => "contraction",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NearSingular { .. } => "near_singular",
            Error::IllConditionedProbes(_) => "ill_conditioned_probes",
            Error::Budget(_) => "budget",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
