use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("phase {phase_rad} rad is outside the encodable range ±{limit_rad} rad")]
    PhaseOutOfRange { phase_rad: f64, limit_rad: f64 },

    #[error("value {value} is outside the [-1, 1] encoding domain")]
    EncodingOutOfRange { value: f64 },

    #[error("combiner received no input fields")]
    EmptyInput,

    #[error("negative photocurrent {current} below clamp tolerance {tolerance}")]
    NegativeIntensity { current: f64, tolerance: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("schedule chunk width {chunk} exceeds the chip's {active} active branches")]
    ChunkWidthExceedsChip { chunk: usize, active: usize },

    #[error("transmission fit diverged: {0}")]
    FitDiverged(String),

    #[error("bias search found no minimum: {0}")]
    NoMinimumFound(String),

    #[error("backpropagation control diverged after {iterations} iterations")]
    Diverged { iterations: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite loss at epoch {epoch}: train={train_loss}")]
    NonFiniteLoss { epoch: usize, train_loss: f64 },

    #[error("vPDS mask cannot reach sparsity {target} (closest {achieved})")]
    SparsityUnreachable { target: f64, achieved: f64 },

    #[error("bad format: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
