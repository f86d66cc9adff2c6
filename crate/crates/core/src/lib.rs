//! Functional simulator and cost model for a hybrid analog/digital spiking
//! transformer accelerator: spike coding, LIF dynamics, stochastic spiking
//! attention, PCM crossbar MVM with nonidealities, drift compensation, and
//! op-count energy/latency estimation.

pub mod aimc;
pub mod cost;
pub mod error;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod spike;
pub mod ssa;

pub use error::{Error, Result};
pub use matrix::{IntMatrix, RateMatrix, RealMatrix};
pub use ssa::{ssa_attend, ssa_attend_streaming, AttentionOutput, HeadActivations, SsaConfig, SsaStreams};
pub use spike::{
    bernoulli_encode, bernoulli_sample_int, rate_of, stochastic_and, BernoulliEncoder, BitMatrix,
    LfsrStream, LifNeuron, RateValue, SpikeTensor, SpikeTrain,
};
pub use aimc::{CalibrationRecord, HwConfig};
pub use model::{Model, ModelConfig, ProgrammedModel, RunOptions, TokenBatch};
