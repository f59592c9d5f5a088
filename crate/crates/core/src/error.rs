//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // -- volume / NIfTI -------------------------------------------------
    #[error("bad NIfTI magic: expected \"n+1\\0\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("invalid NIfTI header field {field}: {detail}")]
    InvalidHeader {
        field: &'static str,
        detail: String,
    },
    #[error("unsupported NIfTI datatype code {code} (supported: uint8=2, int16=4, float32=16)")]
    UnsupportedDatatype { code: i16 },
    #[error("expected a 3-dimensional volume, header declares {ndim} dimensions")]
    NotThreeDimensional { ndim: i16 },
    #[error("truncated NIfTI file: needed {expected} payload bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("volume constraint violated: {0}")]
    InvalidVolume(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("voxel ({x}, {y}, {z}) out of bounds for dims ({nx}, {ny}, {nz})")]
    VoxelOutOfBounds {
        x: usize,
        y: usize,
        z: usize,
        nx: usize,
        ny: usize,
        nz: usize,
    },
    #[error("label {0} outside the BRATS range 0..=4")]
    LabelOutOfRange(u32),

    // -- preprocess ------------------------------------------------------
    #[error("volume has no nonzero voxels")]
    EmptyForeground,
    #[error("degenerate intensity distribution: {0}")]
    DegenerateIntensity(String),
    #[error("invalid preprocessing parameter: {0}")]
    InvalidParameter(String),

    // -- fcn ---------------------------------------------------------------
    #[error("bad weight-file magic: expected \"FCNW\", found {found:?}")]
    BadWeightMagic { found: [u8; 4] },
    #[error("weight file truncated while reading {0}")]
    TruncatedWeights(String),
    #[error("layer {layer}: shape mismatch ({detail})")]
    ShapeMismatch { layer: String, detail: String },
    #[error("channel mismatch: input has {input} channels, layer expects {expected}")]
    ChannelMismatch { input: usize, expected: usize },
    #[error("non-positive output size for layer geometry {0}")]
    InvalidOutputSize(String),
    #[error("crop out of bounds: {0}")]
    CropOutOfBounds(String),

    // -- texton -----------------------------------------------------------
    #[error("empty Gabor parameter grid")]
    EmptyGrid,
    #[error("k-means needs at least k={k} points, got {points}")]
    NotEnoughPoints { points: usize, k: usize },
    #[error("response dimension {responses} does not match codebook dimension {codebook}")]
    ResponseDimMismatch { responses: usize, codebook: usize },
    #[error("bad codebook-file magic: expected \"TXCB\", found {found:?}")]
    BadCodebookMagic { found: [u8; 4] },

    // -- forest -----------------------------------------------------------
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("expected {expected} feature columns, found {found}")]
    FeatureCountMismatch { expected: usize, found: usize },
    #[error("class counts sum to zero")]
    ZeroClassCounts,
    #[error("{folds} folds exceed {samples} samples")]
    FoldsExceedSamples { folds: usize, samples: usize },
    #[error("bad forest-file magic: expected \"RFOR\", found {found:?}")]
    BadForestMagic { found: [u8; 4] },
    #[error("invalid forest configuration: {0}")]
    InvalidForestConfig(String),

    // -- pipeline / phantom -------------------------------------------------
    #[error("training labels contain no tumor voxels")]
    NoTumorInTraining,
    #[error("label {0} absent from the pooled training ground truth")]
    MissingTrainingLabel(u8),
    #[error("score map unavailable for case {0}")]
    MissingScores(String),
    #[error("tumor extends outside the brain ellipsoid")]
    TumorExceedsBrain,
    #[error("bad score-map magic: expected \"SCRM\", found {found:?}")]
    BadScoreMagic { found: [u8; 4] },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
