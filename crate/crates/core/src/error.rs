use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-physical derived quantity `{0}`")]
    NonPhysical(&'static str),

    #[error("loss factor {loss_factor} is outside the low-loss regime (limit {limit})")]
    LossFactorTooLarge { loss_factor: f64, limit: f64 },

    #[error("damping is zero: the envelope maximum never reaches a finite distance")]
    ZeroDamping,

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("time grid is empty")]
    EmptyGrid,

    #[error("time grid is not uniform at sample {index}")]
    NonUniformGrid { index: usize },

    #[error("point ({x}, {y}) is not strictly inside the room")]
    SourceOutsideRoom { x: f64, y: f64 },

    #[error("source coincides with sensor {sensor}")]
    SourceOnSensor { sensor: usize },

    #[error("no sample exceeds the threshold {threshold}")]
    NoOnset { threshold: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("need at least {needed} samples, got {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("invalid sensor pair ({i}, {j}) for {n} sensors")]
    BadPair { i: usize, j: usize, n: usize },

    #[error("grid {nx}x{ny} is too coarse (at least {min} points per axis)")]
    DegenerateGrid { nx: usize, ny: usize, min: usize },

    #[error("region map is empty")]
    EmptyMap,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
