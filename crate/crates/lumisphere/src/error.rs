use std::path::PathBuf;

/// Errors raised by the file, batch and service layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("crop box {0} does not fit the source image")]
    InvalidCrop(String),

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },

    #[error("could not place {requested} non-overlapping spheres after {attempts} attempts")]
    Packing { requested: usize, attempts: usize },

    #[error("nothing to report")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] lumisphere_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Self::Json {
            path: path.into(),
            source,
        }
    }

    /// Stable identifier used in structured error payloads and reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Image { .. } => "image-decode",
            Self::Json { .. } => "json",
            Self::Csv(_) => "csv",
            Self::InvalidCrop(_) => "invalid-crop",
            Self::InvalidAnnotation(_) => "invalid-annotation",
            Self::Bind { .. } => "bind",
            Self::Packing { .. } => "packing",
            Self::EmptyInput => "empty-input",
            Self::Config(_) => "config",
            Self::Core(e) => e.kind(),
        }
    }

    /// Component that raised the error.
    pub fn module(&self) -> &'static str {
        use lumisphere_core::Error as E;
        match self {
            Self::Core(e) => match e {
                E::InvalidNormal { .. } | E::OutsideDisk { .. } => "sh-core",
                E::NoEdges | E::DegenerateFit | E::InsufficientPoints { .. } | E::DegenerateWeights => "circle-em",
                E::InsufficientSamples { .. } | E::IllConditioned { .. } | E::DegenerateEnvironment => {
                    "light-estimator"
                }
                E::InvalidSpec(_) => "sphere-render",
                E::EmptyInput | E::InvalidInput(_) => "core",
            },
            _ => "pipeline",
        }
    }

    /// True for failures that should abort a batch run.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            Self::Io { .. } | Self::Json { .. } | Self::Csv(_) | Self::Config(_) | Self::Bind { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
