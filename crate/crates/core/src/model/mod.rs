//! Spiking transformer assembly: configuration, weights, and end-to-end
//! inference over the crossbar and attention engines.

mod baseline;
mod block;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{IntMatrix, RealMatrix};
use crate::ssa::{MAX_HEAD_DIM, MAX_TOKENS};

pub use baseline::{lif_attention_baseline, BaselineOps, LifAttentionThresholds};
pub use block::{
    encode_inputs, mhsa, run_inference, transformer_block, BlockOutput, InferenceResult, MhsaOutput, OracleGap, ProgrammedBlock,
    ProgrammedModel, RunOptions, TraceRecord,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Bidirectional attention (ViT style).
    Encoder,
    /// Causal attention (GPT style).
    Decoder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// The residual spike is added to the next LIF's input current.
    #[default]
    MembraneAdd,
    /// The residual spike is ORed with the branch output.
    SpikeOr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Arch,
    pub depth: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    /// Sequence length N.
    pub tokens: usize,
    /// Spike encoding length T.
    pub steps: usize,
    #[serde(default)]
    pub residual_mode: ResidualMode,
    /// Width of the embedding projection in front of the first block; only
    /// the cost model uses it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    /// Encoding length used for the digital SNN baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snn_steps: Option<usize>,
}

impl ModelConfig {
    pub fn new(arch: Arch, depth: usize, d_model: usize, heads: usize, tokens: usize, steps: usize) -> Self {
        Self {
            arch,
            depth,
            d_model,
            heads,
            ffn_dim: 4 * d_model,
            tokens,
            steps,
            residual_mode: ResidualMode::MembraneAdd,
            input_dim: None,
            classes: None,
            snn_steps: None,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads.max(1)
    }

    pub fn causal(&self) -> bool {
        self.arch == Arch::Decoder
    }

    /// Shape checks shared by the simulator and the cost model.
    pub fn validate_shapes(&self) -> Result<()> {
        if self.depth == 0 || self.d_model == 0 || self.heads == 0 || self.ffn_dim == 0 || self.tokens == 0 {
            return Err(Error::Config("depth, d_model, heads, ffn_dim and tokens must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("at least one time step is required".into()));
        }
        Ok(())
    }

    /// Full check for simulation: the attention tile needs power-of-two
    /// token counts and head dimensions within its normalizer range.
    pub fn validate(&self) -> Result<()> {
        self.validate_shapes()?;
        let pow2 = |x: usize| x >= 2 && x.is_power_of_two();
        if !pow2(self.tokens) || self.tokens > MAX_TOKENS {
            return Err(Error::Config(format!(
                "tokens {} must be a power of two in 2..={MAX_TOKENS}",
                self.tokens
            )));
        }
        let dk = self.head_dim();
        if !pow2(dk) || dk > MAX_HEAD_DIM {
            return Err(Error::Config(format!(
                "head dimension {dk} must be a power of two in 2..={MAX_HEAD_DIM}"
            )));
        }
        Ok(())
    }
}

/// LIF thresholds of one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockThresholds {
    pub q: i32,
    pub k: i32,
    pub v: i32,
    pub o: i32,
    pub ffn1: i32,
    pub ffn2: i32,
}

impl BlockThresholds {
    pub fn uniform(t: i32) -> Self {
        Self { q: t, k: t, v: t, o: t, ffn1: t, ffn2: t }
    }
}

/// Integer weights of one block; all matrices are `outputs x inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub w_q: IntMatrix,
    pub w_k: IntMatrix,
    pub w_v: IntMatrix,
    pub w_o: IntMatrix,
    pub w_1: IntMatrix,
    pub w_2: IntMatrix,
    /// Dequantization scales in the order q, k, v, o, 1, 2.
    pub scales: [f64; 6],
    pub thresholds: BlockThresholds,
}

impl LayerWeights {
    pub fn zeros(cfg: &ModelConfig, thresholds: BlockThresholds) -> Self {
        let (d, f) = (cfg.d_model, cfg.ffn_dim);
        Self {
            w_q: IntMatrix::zeros(d, d),
            w_k: IntMatrix::zeros(d, d),
            w_v: IntMatrix::zeros(d, d),
            w_o: IntMatrix::zeros(d, d),
            w_1: IntMatrix::zeros(f, d),
            w_2: IntMatrix::zeros(d, f),
            scales: [1.0; 6],
            thresholds,
        }
    }

    pub fn matrices(&self) -> [(&'static str, &IntMatrix); 6] {
        [
            ("w_q", &self.w_q),
            ("w_k", &self.w_k),
            ("w_v", &self.w_v),
            ("w_o", &self.w_o),
            ("w_1", &self.w_1),
            ("w_2", &self.w_2),
        ]
    }

    pub fn check(&self, cfg: &ModelConfig, max_weight: i32) -> Result<()> {
        let (d, f) = (cfg.d_model, cfg.ffn_dim);
        let expect = [(d, d), (d, d), (d, d), (d, d), (f, d), (d, f)];
        for ((name, m), shape) in self.matrices().into_iter().zip(expect) {
            if (m.rows(), m.cols()) != shape {
                return Err(Error::Shape(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                )));
            }
            if m.max_abs() > max_weight {
                return Err(Error::WeightRange { value: m.max_abs(), max: max_weight });
            }
        }
        Ok(())
    }
}

/// Optional classification layer on the final block output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierWeights {
    /// `classes x d_model`.
    pub w: IntMatrix,
    pub scale: f64,
    pub threshold: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub blocks: Vec<LayerWeights>,
    pub classifier: Option<ClassifierWeights>,
    /// Additive rate-domain position embedding, `tokens x d_model`.
    pub position: Option<RealMatrix>,
}

impl Model {
    pub fn check(&self, max_weight: i32) -> Result<()> {
        self.config.validate()?;
        if self.blocks.len() != self.config.depth {
            return Err(Error::Shape(format!(
                "{} blocks for depth {}",
                self.blocks.len(),
                self.config.depth
            )));
        }
        for b in &self.blocks {
            b.check(&self.config, max_weight)?;
        }
        if let Some(c) = &self.classifier {
            if c.w.cols() != self.config.d_model || c.w.rows() == 0 {
                return Err(Error::Shape(format!("classifier is {}x{}", c.w.rows(), c.w.cols())));
            }
        }
        if let Some(p) = &self.position {
            if (p.rows(), p.cols()) != (self.config.tokens, self.config.d_model) {
                return Err(Error::Shape(format!("position embedding is {}x{}", p.rows(), p.cols())));
            }
        }
        Ok(())
    }

    /// Random integer weights with thresholds from [`default_threshold`]
    /// assuming half-rate inputs. Used by tests and the toy model.
    pub fn random(config: ModelConfig, seed: u64, max_weight: i32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, f) = (config.d_model, config.ffn_dim);
        let mut mat = |r: usize, c: usize| IntMatrix::from_fn(r, c, |_, _| rng.random_range(-max_weight..=max_weight));
        let blocks = (0..config.depth)
            .map(|_| LayerWeights {
                w_q: mat(d, d),
                w_k: mat(d, d),
                w_v: mat(d, d),
                w_o: mat(d, d),
                w_1: mat(f, d),
                w_2: mat(d, f),
                scales: [1.0; 6],
                thresholds: BlockThresholds {
                    q: default_threshold(d, 0.5),
                    k: default_threshold(d, 0.5),
                    v: default_threshold(d, 0.5),
                    o: default_threshold(d, 0.5),
                    ffn1: default_threshold(d, 0.5),
                    ffn2: default_threshold(f, 0.5),
                },
            })
            .collect();
        let classifier = config.classes.map(|c| ClassifierWeights {
            w: mat(c, d),
            scale: 1.0,
            threshold: default_threshold(d, 0.5),
        });
        Self { config, blocks, classifier, position: None }
    }
}

/// `max(1, round(0.25 * fan_in * mean_rate))`.
pub fn default_threshold(fan_in: usize, mean_rate: f64) -> i32 {
    ((0.25 * fan_in as f64 * mean_rate).round() as i32).max(1)
}

/// `tokens x d_model` rates in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenBatch {
    rates: RealMatrix,
}

impl TokenBatch {
    pub fn new(rates: RealMatrix) -> Result<Self> {
        if let Some(bad) = rates.as_slice().iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Config(format!("rate {bad} outside [0, 1]")));
        }
        Ok(Self { rates })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(RealMatrix::from_rows(rows)?)
    }

    pub fn rates(&self) -> &RealMatrix {
        &self.rates
    }

    pub fn tokens(&self) -> usize {
        self.rates.rows()
    }

    pub fn features(&self) -> usize {
        self.rates.cols()
    }

    /// Add a position embedding and clamp back into `[0, 1]`.
    pub fn with_position(&self, pos: &RealMatrix) -> Result<Self> {
        if (pos.rows(), pos.cols()) != (self.tokens(), self.features()) {
            return Err(Error::Shape("position embedding shape differs from the batch".into()));
        }
        let rates = RealMatrix::from_fn(self.tokens(), self.features(), |r, c| {
            (self.rates.get(r, c) + pos.get(r, c)).clamp(0.0, 1.0)
        });
        Ok(Self { rates })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let cfg = ModelConfig::new(Arch::Encoder, 2, 32, 2, 8, 16);
        cfg.validate().unwrap();
        assert_eq!(cfg.head_dim(), 16);
        assert!(ModelConfig { heads: 3, ..cfg.clone() }.validate().is_err());
        assert!(ModelConfig { tokens: 6, ..cfg.clone() }.validate().is_err());
        assert!(ModelConfig { tokens: 196, ..cfg.clone() }.validate_shapes().is_ok());
        assert!(ModelConfig { tokens: 196, ..cfg }.validate().is_err());
    }

    #[test]
    fn threshold_helper() {
        assert_eq!(default_threshold(32, 0.5), 4);
        assert_eq!(default_threshold(1, 0.1), 1);
    }

    #[test]
    fn batch_rejects_out_of_range_rates() {
        assert!(TokenBatch::from_rows(&[vec![0.0, 1.2]]).is_err());
        let b = TokenBatch::from_rows(&[vec![0.2, 0.9]]).unwrap();
        let pos = RealMatrix::from_rows(&[vec![-0.5, 0.3]]).unwrap();
        assert_eq!(b.with_position(&pos).unwrap().rates().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn weight_checks() {
        let cfg = ModelConfig::new(Arch::Encoder, 1, 8, 2, 4, 4);
        let mut m = Model::random(cfg.clone(), 1, 15);
        m.check(15).unwrap();
        m.blocks[0].w_1 = IntMatrix::zeros(8, 8);
        assert!(matches!(m.check(15), Err(Error::Shape(_))));
        let mut m = Model::random(cfg, 1, 15);
        m.blocks[0].w_q.set(0, 0, 16);
        assert!(matches!(m.check(15), Err(Error::WeightRange { .. })));
    }
}
