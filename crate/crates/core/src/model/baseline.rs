//! Digital LIF attention, `LIF(LIF(Q^T K) V)`, the spiking-transformer
//! attention used by the digital SNN baseline.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spike::{BitMatrix, LifNeuron};
use crate::ssa::{AttentionOutput, HeadActivations, SsaConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifAttentionThresholds {
    pub score: i32,
    pub output: i32,
}

impl Default for LifAttentionThresholds {
    fn default() -> Self {
        Self { score: 1, output: 1 }
    }
}

/// Work done by one head, dense over the whole score matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineOps {
    pub masked_adds: u64,
    pub lif_updates: u64,
}

/// Integer score matrix per step, one LIF per score entry, integer product
/// with V, one LIF per output entry. Membranes persist across steps.
pub fn lif_attention_baseline(
    head: &HeadActivations,
    cfg: &SsaConfig,
    th: LifAttentionThresholds,
) -> Result<(AttentionOutput, BaselineOps)> {
    let (n_tok, dk) = (head.tokens(), head.head_dim());
    let shape_cfg = SsaConfig { tokens: n_tok, head_dim: dk, ..*cfg };
    if shape_cfg != *cfg || head.steps() != cfg.steps {
        return Err(crate::error::Error::Shape("activations do not match the attention config".into()));
    }
    let mut score_lif = vec![LifNeuron::new(th.score, 1)?; n_tok * n_tok];
    let mut out_lif = vec![LifNeuron::new(th.output, 1)?; dk * n_tok];
    let mut ops = BaselineOps::default();
    let mut a = Vec::with_capacity(head.steps());
    for t in 0..head.steps() {
        let (q, k, v) = (&head.q[t], &head.k[t], &head.v[t]);
        let mut s = BitMatrix::zeros(n_tok, n_tok);
        for i in 0..n_tok {
            for j in 0..n_tok {
                let sum = (0..dk).filter(|&d| q.get(d, i) && k.get(d, j)).count() as i32;
                let masked = cfg.causal && j > i;
                s.set(i, j, score_lif[i * n_tok + j].step(if masked { 0 } else { sum }) && !masked);
            }
        }
        let mut out = BitMatrix::zeros(dk, n_tok);
        for d in 0..dk {
            for i in 0..n_tok {
                let sum = (0..n_tok).filter(|&j| s.get(i, j) && v.get(d, j)).count() as i32;
                out.set(d, i, out_lif[d * n_tok + i].step(sum));
            }
        }
        ops.masked_adds += 2 * (n_tok * n_tok * dk) as u64;
        ops.lif_updates += (n_tok * n_tok + dk * n_tok) as u64;
        a.push(out);
    }
    Ok((AttentionOutput { a }, ops))
}
