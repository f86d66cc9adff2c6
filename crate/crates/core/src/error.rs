use thiserror::Error;

/// Errors raised by the simulator and cost model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("LFSR register must be nonzero")]
    ZeroRegister,

    /// A Bernoulli encoder saw an integer above its normalizer. This means the
    /// configured token count or head dimension does not match the data.
    #[error("counter overflow: input {input} exceeds normalizer {i_max}")]
    CounterOverflow { input: u32, i_max: u32 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("weight {value} outside representable range [-{max}, {max}]")]
    WeightRange { value: i32, max: i32 },

    #[error("crossbar inputs must be binary, got {0}")]
    NonBinaryInput(i32),

    #[error("read time {t_now} s precedes programming time {t_prog} s")]
    TimeOrder { t_now: f64, t_prog: f64 },

    #[error("energy table `{table}` has no entry for `{op}`")]
    MissingEnergy { table: String, op: String },

    #[error("unknown implementation `{0}`")]
    UnknownImpl(String),

    #[error("model weights are not programmed onto crossbars")]
    Unprogrammed,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
