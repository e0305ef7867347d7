use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undistortion did not converge at pixel ({x:.3}, {y:.3})")]
    Undistortion { x: f64, y: f64 },

    #[error("unsupported camera model: {0}")]
    UnsupportedModel(String),

    #[error("invalid conic: {0}")]
    InvalidConic(&'static str),

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("scene file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
