use thiserror::Error;

/// Errors raised while building or running a distillation instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("party index {index} out of range for {parties} parties")]
    PartyOutOfRange { index: usize, parties: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator has eigenvalue {eigenvalue:.3e} below the PSD tolerance")]
    NotPositive { eigenvalue: f64 },

    #[error("operator is not a density matrix: {reason}")]
    NotDensity { reason: String },

    #[error("invalid state spec: {0}")]
    InvalidSpec(String),

    #[error("α₀ = {pivot} is not the minimal coefficient (ratio {ratio} exceeds 1)")]
    PivotNotMinimal { pivot: f64, ratio: f64 },

    #[error("β_(P-1) = {pivot} is not the maximal coefficient (ratio {ratio} exceeds 1)")]
    PivotNotMaximal { pivot: f64, ratio: f64 },

    #[error("dense dimension {dim} exceeds the cap of {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("invalid partition: {0}")]
    BadPartition(String),

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid steering scenario: {0}")]
    InvalidSteeringScenario(String),

    #[error("no mutually unbiased bases provided for dimension {0}")]
    UnsupportedDimension(usize),

    #[error("filter on party {0} touches an uncharacterized party")]
    UncharacterizedFilter(usize),

    #[error("assemblage shapes differ")]
    ShapeMismatch,

    #[error("post-selected branch has zero probability")]
    ZeroProbability,
}

impl Error {
    /// Stable machine-readable category, used by the CLI for error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::PartyOutOfRange { .. } => "PartyOutOfRange",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotPositive { .. } => "NotPositive",
            Error::NotDensity { .. } => "NotDensity",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::PivotNotMinimal { .. } => "PivotNotMinimal",
            Error::PivotNotMaximal { .. } => "PivotNotMaximal",
            Error::DenseCapExceeded { .. } => "DenseCapExceeded",
            Error::BadPartition(_) => "BadPartition",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidSteeringScenario(_) => "InvalidSteeringScenario",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::UncharacterizedFilter(_) => "UncharacterizedFilter",
            Error::ShapeMismatch => "ShapeMismatch",
            Error::ZeroProbability => "ZeroProbability",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
