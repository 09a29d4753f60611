use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty raster: requested a {width}x{height} image")]
    EmptyRaster { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient for gaussian {gaussian}, parameter `{param}`")]
    NonFiniteGradient { gaussian: usize, param: &'static str },

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("degenerate control triangle")]
    DegenerateTriangle,

    #[error("singular linear map in edit rule {rule}")]
    SingularEdit { rule: usize },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("empty mesh")]
    EmptyMesh,

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated payload: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("frame size mismatch: {first} is {first_dims:?} but {second} is {second_dims:?}")]
    FrameSizeMismatch {
        first: PathBuf,
        first_dims: (usize, usize),
        second: PathBuf,
        second_dims: (usize, usize),
    },

    #[error("need at least 2 frames, found {0}")]
    TooFewFrames(usize),

    #[error("pose files are not supported ({0}); frames must lie on parallel, equispaced planes")]
    PoseUnsupported(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } | Error::NotPositiveDefinite
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
