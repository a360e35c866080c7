use std::path::PathBuf;

/// Errors produced by the segmentation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {source}")]
    Decode {
        path: PathBuf,
        source: image::ImageError,
    },

    #[error("failed to encode {path}: {source}")]
    Encode {
        path: PathBuf,
        source: image::ImageError,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("label map has {0} labels; at most 65536 fit in a 16-bit label map")]
    TooManyLabels(usize),

    #[error("empty segmentation")]
    EmptySegmentation,

    #[error("no usable images in dataset: {0}")]
    EmptyDataset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
