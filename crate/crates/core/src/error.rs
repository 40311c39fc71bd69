use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A direction whose norm deviates from 1, or that faces away from the camera.
    InvalidNormal { norm: f64 },
    /// A pixel on or outside the projected sphere boundary.
    OutsideDisk { x: f64, y: f64 },
    /// Edge preprocessing left no candidate boundary pixels.
    NoEdges,
    /// The minimal eigenvector does not describe a circle.
    DegenerateFit,
    /// Fewer than three points carry positive weight.
    InsufficientPoints { needed: usize, got: usize },
    /// Every weight is zero.
    DegenerateWeights,
    /// Fewer samples than unknowns in the lighting system.
    InsufficientSamples { needed: usize, got: usize },
    /// The normal matrix of the lighting system is too poorly conditioned.
    IllConditioned { condition: f64 },
    /// The zeroth-order coefficient is (numerically) zero.
    DegenerateEnvironment,
    /// The render specification does not fit its frame.
    InvalidSpec(&'static str),
    /// An empty list where at least one value is required.
    EmptyInput,
    /// Any other violated precondition.
    InvalidInput(&'static str),
}

impl Error {
    /// Stable machine-readable identifier, used in structured error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidNormal { .. } => "invalid-normal",
            Self::OutsideDisk { .. } => "outside-disk",
            Self::NoEdges => "no-edges",
            Self::DegenerateFit => "degenerate-fit",
            Self::InsufficientPoints { .. } => "insufficient-points",
            Self::DegenerateWeights => "degenerate-weights",
            Self::InsufficientSamples { .. } => "insufficient-samples",
            Self::IllConditioned { .. } => "ill-conditioned",
            Self::DegenerateEnvironment => "degenerate-environment",
            Self::InvalidSpec(_) => "invalid-spec",
            Self::EmptyInput => "empty-input",
            Self::InvalidInput(_) => "invalid-input",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidNormal { norm } => write!(f, "invalid normal: norm {norm} is not 1"),
            Self::OutsideDisk { x, y } => write!(f, "pixel ({x}, {y}) is not inside the disk"),
            Self::NoEdges => write!(f, "no edge pixels survived preprocessing"),
            Self::DegenerateFit => write!(f, "degenerate circle fit"),
            Self::InsufficientPoints { needed, got } => {
                write!(f, "insufficient weighted points: need {needed}, got {got}")
            }
            Self::DegenerateWeights => write!(f, "all weights are zero"),
            Self::InsufficientSamples { needed, got } => {
                write!(f, "insufficient samples: need {needed}, got {got}")
            }
            Self::IllConditioned { condition } => {
                write!(f, "lighting system is ill-conditioned (condition number {condition:e})")
            }
            Self::DegenerateEnvironment => write!(f, "zeroth-order lighting coefficient is zero"),
            Self::InvalidSpec(msg) => write!(f, "invalid render spec: {msg}"),
            Self::EmptyInput => write!(f, "empty input"),
            Self::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
