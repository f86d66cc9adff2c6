use serde::{Deserialize, Serialize};

use super::{count_ops, Impl, OpKind};
use crate::aimc::AimcConfig;
use crate::error::Result;
use crate::model::ModelConfig;

/// Parallel lanes assumed for the digital implementations.
pub const DEFAULT_DIGITAL_LANES: f64 = 4096.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub name: String,
    pub cycles: f64,
}

/// Analytical cycle estimate; not an event-driven simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub cycles: f64,
    pub stages: Vec<StageLatency>,
    pub approximate: bool,
}

/// One attention head over `steps` steps: a `d_K`-cycle fill, then one output
/// phase per step.
pub fn ssa_head_cycles(steps: usize, head_dim: usize) -> u64 {
    ((steps + 1) * head_dim) as u64
}

/// Readout rounds of `layers` chained crossbar layers processing `vectors`
/// input vectors; later layers overlap and add one stage delay each.
fn aimc_segment(vectors: f64, layers: usize, sharing: f64) -> f64 {
    vectors * sharing + layers.saturating_sub(1) as f64 * sharing
}

pub fn estimate_latency(cfg: &ModelConfig, imp: Impl, aimc: &AimcConfig) -> Result<LatencyReport> {
    cfg.validate_shapes()?;
    let s = aimc.adc_sharing as f64;
    let n = cfg.tokens as f64;
    let mut stages = Vec::new();
    let mut push = |name: String, cycles: f64| stages.push(StageLatency { name, cycles });
    match imp {
        Impl::Xpikeformer => {
            let t = cfg.steps as f64;
            if cfg.input_dim.is_some() {
                push("embed".into(), aimc_segment(t * n, 1, s));
            }
            for b in 0..cfg.depth {
                push(format!("block{b}.qkv"), aimc_segment(t * n, 1, s));
                push(format!("block{b}.ssa"), ssa_head_cycles(cfg.steps, cfg.head_dim()) as f64);
                push(format!("block{b}.proj_ffn"), aimc_segment(t * n, 3, s));
            }
            if cfg.classes.is_some() {
                push("classifier".into(), aimc_segment(t, 1, s));
            }
        }
        Impl::AnnQuantAimc => {
            let per_layer = aimc_segment(8.0 * n, 1, s);
            let layers = cfg.depth * 6 + cfg.input_dim.is_some() as usize;
            push("crossbar".into(), per_layer * layers as f64);
            let c = count_ops(cfg, imp)?;
            let digital: f64 = [OpKind::Mac8, OpKind::Softmax, OpKind::LayerNorm, OpKind::Gelu, OpKind::Add8]
                .iter()
                .map(|&op| c.op_total(op))
                .sum();
            push("digital".into(), digital / DEFAULT_DIGITAL_LANES);
        }
        Impl::AnnQuant | Impl::SnnDigiOpt => {
            let c = count_ops(cfg, imp)?;
            let ops: f64 = c.iter().filter(|(comp, _, _)| !comp.is_memory()).map(|(_, _, v)| v).sum();
            push("digital".into(), ops / DEFAULT_DIGITAL_LANES);
        }
    }
    let cycles = stages.iter().map(|s| s.cycles).sum();
    Ok(LatencyReport { cycles, stages, approximate: true })
}
