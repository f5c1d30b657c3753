use thiserror::Error;

/// Every failure the library can report. Variant names double as the
/// "failing module error name" printed by the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular matrix: |ad - bc| = {det_abs:e} is below 1e-14")]
    SingularMatrix { det_abs: f64 },

    #[error("invalid step measure: {0}")]
    InvalidMeasure(String),

    #[error("contraction window invalid: lambda' = {lambda_prime} must be below lambda'' = {lambda_dblprime} and positive")]
    WindowInvalid { lambda_prime: f64, lambda_dblprime: f64 },

    #[error("step variance {0:e} exceeds the 1e-3 cap")]
    StepTooLarge(f64),

    #[error("start point {0} is not inside the unit disc")]
    StartOutsideDisc(String),

    #[error("point lies outside the hyperbolic disc: {0}")]
    OutsideDisc(String),

    #[error("bad radii: {0}")]
    BadRadii(String),

    #[error("requested time {requested} exceeds path horizon {horizon}")]
    HorizonExceeded { requested: f64, horizon: f64 },

    #[error("disc boundary passes within 1e-6 of the Green function pole at 0")]
    PoleOnBoundary,

    #[error("orbit index would exceed {cap} points")]
    WordBudgetExceeded { cap: usize },

    #[error("orbit points of distinct words collide: {0}")]
    OrbitCollision(String),

    #[error("invalid FLS configuration: {0}")]
    InvalidFlsConfig(String),

    #[error("path left the indexed orbit or hit the excursion time cap: {0}")]
    OrbitCoverageExceeded(String),

    #[error("path must start inside V_Id: hyperbolic distance {dist} >= delta' = {delta_prime}")]
    StartOutsideV { dist: f64, delta_prime: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient accepted steps: {0}")]
    InsufficientAcceptedSteps(String),

    #[error("unknown generator symbol '{0}'")]
    UnknownSymbol(char),

    #[error("point hits the puncture")]
    PunctureHit,

    #[error("developing map has a critical point (derivative vanishes) at {0}")]
    BranchPoint(String),

    #[error("point {0} is outside the image of the developing map")]
    OutOfImage(String),

    #[error("operation not supported for this structure: {0}")]
    UnsupportedStructure(String),

    #[error("empty tail: {0}")]
    EmptyTail(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name for diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::InvalidMeasure(_) => "InvalidMeasure",
            Error::WindowInvalid { .. } => "WindowInvalid",
            Error::StepTooLarge(_) => "StepTooLarge",
            Error::StartOutsideDisc(_) => "StartOutsideDisc",
            Error::OutsideDisc(_) => "OutsideDisc",
            Error::BadRadii(_) => "BadRadii",
            Error::HorizonExceeded { .. } => "HorizonExceeded",
            Error::PoleOnBoundary => "PoleOnBoundary",
            Error::WordBudgetExceeded { .. } => "WordBudgetExceeded",
            Error::OrbitCollision(_) => "OrbitCollision",
            Error::InvalidFlsConfig(_) => "InvalidFlsConfig",
            Error::OrbitCoverageExceeded(_) => "OrbitCoverageExceeded",
            Error::StartOutsideV { .. } => "StartOutsideV",
            Error::InsufficientData(_) => "InsufficientData",
            Error::InsufficientAcceptedSteps(_) => "InsufficientAcceptedSteps",
            Error::UnknownSymbol(_) => "UnknownSymbol",
            Error::PunctureHit => "PunctureHit",
            Error::BranchPoint(_) => "BranchPoint",
            Error::OutOfImage(_) => "OutOfImage",
            Error::UnsupportedStructure(_) => "UnsupportedStructure",
            Error::EmptyTail(_) => "EmptyTail",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
