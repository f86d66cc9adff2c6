use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ResidualMode, TokenBatch};
use crate::aimc::{gdc_calibrate, AdcMode, AimcLayer, CalibrationRecord, CrossbarTile, HwConfig, LayerStats, TileReadout};
use crate::error::{Error, Result};
use crate::oracle::{conditional_attention_rates, reference_lif_layer};
use crate::spike::{bernoulli_encode, domain, quantize_rate, unit_base, BitMatrix, LfsrStream, RateValue, SpikeTensor};
use crate::ssa::{ssa_attend, AttentionOutput, HeadActivations, SsaConfig, SsaStreams};

/// Crossbar layers of one block, in the order q, k, v, o, ffn1, ffn2.
#[derive(Clone, Debug)]
pub struct ProgrammedBlock {
    pub q: AimcLayer,
    pub k: AimcLayer,
    pub v: AimcLayer,
    pub o: AimcLayer,
    pub ffn1: AimcLayer,
    pub ffn2: AimcLayer,
}

impl ProgrammedBlock {
    fn layers(&self) -> [&AimcLayer; 6] {
        [&self.q, &self.k, &self.v, &self.o, &self.ffn1, &self.ffn2]
    }
}

/// Conductance snapshots of one block at the run's `t_now`.
type BlockReadouts = [Vec<TileReadout>; 6];

/// A model with every linear layer programmed onto crossbars.
#[derive(Clone, Debug)]
pub struct ProgrammedModel {
    pub model: Model,
    pub hw: HwConfig,
    pub seed: u64,
    pub blocks: Vec<ProgrammedBlock>,
    pub classifier: Option<AimcLayer>,
}

const LAYERS_PER_BLOCK: u64 = 8;

impl ProgrammedModel {
    /// Program all weights at `t = 0`.
    pub fn program(model: Model, hw: &HwConfig, seed: u64) -> Result<Self> {
        hw.validate()?;
        model.check(hw.aimc.max_weight())?;
        let blocks = model
            .blocks
            .iter()
            .enumerate()
            .map(|(b, w)| {
                let th = &w.thresholds;
                let uid = |i: u64| b as u64 * LAYERS_PER_BLOCK + i;
                Ok(ProgrammedBlock {
                    q: AimcLayer::program(&w.w_q, th.q, hw, seed, uid(0), 0.0)?,
                    k: AimcLayer::program(&w.w_k, th.k, hw, seed, uid(1), 0.0)?,
                    v: AimcLayer::program(&w.w_v, th.v, hw, seed, uid(2), 0.0)?,
                    o: AimcLayer::program(&w.w_o, th.o, hw, seed, uid(3), 0.0)?,
                    ffn1: AimcLayer::program(&w.w_1, th.ffn1, hw, seed, uid(4), 0.0)?,
                    ffn2: AimcLayer::program(&w.w_2, th.ffn2, hw, seed, uid(5), 0.0)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let classifier = match &model.classifier {
            Some(c) => Some(AimcLayer::program(
                &c.w,
                c.threshold,
                hw,
                seed,
                model.config.depth as u64 * LAYERS_PER_BLOCK,
                0.0,
            )?),
            None => None,
        };
        Ok(Self { model, hw: hw.clone(), seed, blocks, classifier })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    pub fn tiles(&self) -> Vec<&CrossbarTile> {
        self.blocks
            .iter()
            .flat_map(|b| b.layers())
            .chain(self.classifier.iter())
            .flat_map(|l| l.tiles.iter())
            .collect()
    }

    /// Global drift compensation over every tile of the model.
    pub fn calibrate(&self, probes: usize, t_now: f64) -> Result<CalibrationRecord> {
        gdc_calibrate(&self.tiles(), probes, t_now, self.seed)
    }

    /// True when the hardware config makes crossbar reads exact integers.
    pub fn hardware_is_ideal(&self) -> bool {
        let hw = &self.hw;
        hw.aimc.adc_mode == AdcMode::Ideal
            && hw.noise.prog() == 0.0
            && hw.noise.read() == 0.0
            && hw.drift.nu_mean == 0.0
            && hw.drift.nu_sigma == 0.0
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the configured encoding length.
    pub steps: Option<usize>,
    pub calib: Option<CalibrationRecord>,
    pub trace: bool,
    /// Track the gap to the exact conditional oracles.
    pub oracle: bool,
}

/// One line of the per-layer trace dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub block: Option<usize>,
    pub stage: String,
    pub spikes: u64,
    pub mean_rate: f64,
}

impl TraceRecord {
    fn of(block: Option<usize>, stage: &str, s: &SpikeTensor) -> Self {
        let spikes = (0..s.tokens()).map(|n| s.token(n).iter().filter(|&&b| b).count() as u64).sum();
        Self { block, stage: stage.to_string(), spikes, mean_rate: s.mean_rate() }
    }
}

/// Distance between simulated rates and their exact conditional oracles.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleGap {
    /// max |encoded rate - q/256| over inputs.
    pub encoding_max: f64,
    /// max and median of |time-averaged attention - conditional expectation|.
    pub attention_max: f64,
    pub attention_median: f64,
    /// Median over all tracked entries (encoding and attention).
    pub median: f64,
    pub max: f64,
    /// Whether every crossbar+LIF stage matched the monolithic integer
    /// reference bit for bit; only checked on ideal hardware.
    pub linear_exact: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub steps: usize,
    /// `tokens x d_model` output rates.
    pub output_rates: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleGap>,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
    #[serde(skip)]
    pub stats: LayerStats,
}

/// Bernoulli-encode every token feature with its own stream.
pub fn encode_inputs(batch: &TokenBatch, steps: usize, seed: u64) -> SpikeTensor {
    let (n_tok, feats) = (batch.tokens(), batch.features());
    let base = unit_base(domain::INPUT_ENCODER, 0, 0);
    let blocks = (0..n_tok)
        .into_par_iter()
        .map(|n| {
            let trains: Vec<_> = (0..feats)
                .map(|f| {
                    let mut s = LfsrStream::for_unit(seed, base + (n * feats + f) as u64);
                    bernoulli_encode(RateValue::saturating(batch.rates().get(n, f)), steps, &mut s)
                })
                .collect();
            let mut block = Vec::with_capacity(steps * feats);
            for t in 0..steps {
                block.extend(trains.iter().map(|tr| tr.bits()[t]));
            }
            block
        })
        .collect();
    SpikeTensor::from_token_blocks(steps, feats, blocks).expect("blocks are built to shape")
}

/// Attention stage internals.
#[derive(Clone, Debug)]
pub struct MhsaOutput {
    pub q: SpikeTensor,
    pub k: SpikeTensor,
    pub v: SpikeTensor,
    pub heads: Vec<HeadActivations>,
    pub attention: Vec<AttentionOutput>,
    /// Head outputs concatenated along features.
    pub concat: SpikeTensor,
    /// After the output projection and residual merge.
    pub output: SpikeTensor,
    pub stats: LayerStats,
}

fn split_heads(q: &SpikeTensor, k: &SpikeTensor, v: &SpikeTensor, heads: usize) -> Vec<HeadActivations> {
    let dk = q.features() / heads;
    let per = |s: &SpikeTensor, h: usize| -> Vec<BitMatrix> {
        (0..s.steps())
            .map(|t| BitMatrix::from_fn(dk, s.tokens(), |d, n| s.get(n, t, h * dk + d)))
            .collect()
    };
    (0..heads)
        .map(|h| HeadActivations::new(per(q, h), per(k, h), per(v, h)).expect("shapes agree by construction"))
        .collect()
}

fn merge(
    layer: &AimcLayer,
    readouts: &[TileReadout],
    input: &SpikeTensor,
    residual: &SpikeTensor,
    mode: ResidualMode,
    calib: Option<&CalibrationRecord>,
) -> Result<(SpikeTensor, LayerStats)> {
    match mode {
        ResidualMode::MembraneAdd => layer.forward_with(readouts, input, calib, Some(residual)),
        ResidualMode::SpikeOr => {
            let (y, s) = layer.forward_with(readouts, input, calib, None)?;
            Ok((y.or(residual)?, s))
        }
    }
}

/// Multi-head attention: Q/K/V projections, one attention tile per head,
/// concatenation, and the output projection merged with `residual`.
#[allow(clippy::too_many_arguments)]
pub fn mhsa(
    x: &SpikeTensor,
    block: &ProgrammedBlock,
    readouts: &BlockReadouts,
    cfg: &ModelConfig,
    seed: u64,
    layer_index: usize,
    residual: &SpikeTensor,
    calib: Option<&CalibrationRecord>,
) -> Result<MhsaOutput> {
    if x.features() != cfg.d_model || x.tokens() != cfg.tokens {
        return Err(Error::Shape(format!(
            "block input is {}x{}, expected {}x{}",
            x.tokens(),
            x.features(),
            cfg.tokens,
            cfg.d_model
        )));
    }
    let mut stats = LayerStats::default();
    let (q, s) = block.q.forward_with(&readouts[0], x, calib, None)?;
    stats.merge(&s);
    let (k, s) = block.k.forward_with(&readouts[1], x, calib, None)?;
    stats.merge(&s);
    let (v, s) = block.v.forward_with(&readouts[2], x, calib, None)?;
    stats.merge(&s);

    let heads = split_heads(&q, &k, &v, cfg.heads);
    let ssa_cfg = SsaConfig::new(cfg.tokens, cfg.head_dim(), cfg.causal(), x.steps())?;
    let attention = heads
        .par_iter()
        .enumerate()
        .map(|(h, act)| ssa_attend(act, &ssa_cfg, &SsaStreams::new(seed, layer_index, h)))
        .collect::<Result<Vec<_>>>()?;

    let dk = cfg.head_dim();
    let concat = SpikeTensor::from_fn(x.tokens(), x.steps(), cfg.d_model, |n, t, f| {
        attention[f / dk].a[t].get(f % dk, n)
    });
    let (output, s) = merge(&block.o, &readouts[3], &concat, residual, cfg.residual_mode, calib)?;
    stats.merge(&s);
    Ok(MhsaOutput { q, k, v, heads, attention, concat, output, stats })
}

#[derive(Clone, Debug)]
pub struct BlockOutput {
    pub attention: MhsaOutput,
    pub hidden: SpikeTensor,
    pub output: SpikeTensor,
    pub stats: LayerStats,
}

/// Attention, residual merge, two-layer LIF feed-forward, residual merge. No
/// normalization of any kind.
#[allow(clippy::too_many_arguments)]
pub fn transformer_block(
    x: &SpikeTensor,
    block: &ProgrammedBlock,
    readouts: &BlockReadouts,
    cfg: &ModelConfig,
    seed: u64,
    layer_index: usize,
    calib: Option<&CalibrationRecord>,
) -> Result<BlockOutput> {
    let attention = mhsa(x, block, readouts, cfg, seed, layer_index, x, calib)?;
    let mut stats = attention.stats.clone();
    let o = &attention.output;
    let (hidden, s) = block.ffn1.forward_with(&readouts[4], o, calib, None)?;
    stats.merge(&s);
    let (output, s) = merge(&block.ffn2, &readouts[5], &hidden, o, cfg.residual_mode, calib)?;
    stats.merge(&s);
    Ok(BlockOutput { attention, hidden, output, stats })
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Check every crossbar stage of a block against the monolithic reference.
fn block_is_exact(x: &SpikeTensor, out: &BlockOutput, w: &super::LayerWeights, mode: ResidualMode) -> Result<bool> {
    let th = &w.thresholds;
    let a = &out.attention;
    let res = |r: &SpikeTensor| if mode == ResidualMode::MembraneAdd { Some(r.clone()) } else { None };
    let or = |y: SpikeTensor, r: &SpikeTensor| if mode == ResidualMode::SpikeOr { y.or(r) } else { Ok(y) };
    Ok(reference_lif_layer(&w.w_q, th.q, x, None)? == a.q
        && reference_lif_layer(&w.w_k, th.k, x, None)? == a.k
        && reference_lif_layer(&w.w_v, th.v, x, None)? == a.v
        && or(reference_lif_layer(&w.w_o, th.o, &a.concat, res(x).as_ref())?, x)? == a.output
        && reference_lif_layer(&w.w_1, th.ffn1, &a.output, None)? == out.hidden
        && or(reference_lif_layer(&w.w_2, th.ffn2, &out.hidden, res(&a.output).as_ref())?, &a.output)? == out.output)
}

/// Encode, run every block in order, decode rates by time averaging.
pub fn run_inference(pm: &ProgrammedModel, batch: &TokenBatch, t_now: f64, opts: &RunOptions) -> Result<InferenceResult> {
    let cfg = pm.config();
    let steps = opts.steps.unwrap_or(cfg.steps);
    if steps == 0 {
        return Err(Error::Config("at least one time step is required".into()));
    }
    if (batch.tokens(), batch.features()) != (cfg.tokens, cfg.d_model) {
        return Err(Error::Shape(format!(
            "input is {}x{}, model expects {}x{}",
            batch.tokens(),
            batch.features(),
            cfg.tokens,
            cfg.d_model
        )));
    }
    let batch = match &pm.model.position {
        Some(p) => batch.with_position(p)?,
        None => batch.clone(),
    };
    let calib = opts.calib.as_ref();
    let x0 = encode_inputs(&batch, steps, pm.seed);

    let mut trace = Vec::new();
    let mut stats = LayerStats::default();
    let mut att_gaps = Vec::new();
    let mut linear_exact = (opts.oracle && calib.is_none() && pm.hardware_is_ideal()).then_some(true);
    if opts.trace {
        trace.push(TraceRecord::of(None, "input", &x0));
    }

    let mut x = x0.clone();
    for (b, block) in pm.blocks.iter().enumerate() {
        let readouts: BlockReadouts = [
            block.q.readouts(t_now)?,
            block.k.readouts(t_now)?,
            block.v.readouts(t_now)?,
            block.o.readouts(t_now)?,
            block.ffn1.readouts(t_now)?,
            block.ffn2.readouts(t_now)?,
        ];
        let out = transformer_block(&x, block, &readouts, cfg, pm.seed, b, calib)?;
        stats.merge(&out.stats);
        if opts.trace {
            let a = &out.attention;
            for (stage, s) in [
                ("q", &a.q),
                ("k", &a.k),
                ("v", &a.v),
                ("attention", &a.concat),
                ("attention_out", &a.output),
                ("ffn_hidden", &out.hidden),
                ("block_out", &out.output),
            ] {
                trace.push(TraceRecord::of(Some(b), stage, s));
            }
        }
        if opts.oracle {
            for (act, att) in out.attention.heads.iter().zip(&out.attention.attention) {
                let expect = conditional_attention_rates(&act.q, &act.k, &act.v, cfg.causal())?;
                let got = att.rates();
                att_gaps.extend(got.as_slice().iter().zip(expect.as_slice()).map(|(a, e)| (a - e).abs()));
            }
            if let Some(ok) = linear_exact.as_mut() {
                *ok = *ok && block_is_exact(&x, &out, &pm.model.blocks[b], cfg.residual_mode)?;
            }
        }
        x = out.output;
    }

    let output_rates = x.rates();
    let (class_scores, predicted_class) = match &pm.classifier {
        Some(layer) => {
            let (y, s) = layer.forward(&x, t_now, calib, None)?;
            stats.merge(&s);
            if opts.trace {
                trace.push(TraceRecord::of(None, "classifier", &y));
            }
            let rates = y.rates();
            let scores: Vec<f64> = match cfg.causal() {
                true => rates[rates.len() - 1].clone(),
                false => (0..y.features())
                    .map(|c| rates.iter().map(|r| r[c]).sum::<f64>() / rates.len() as f64)
                    .collect(),
            };
            let best = scores
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
                .0;
            (Some(scores), Some(best))
        }
        None => (None, None),
    };

    let oracle = opts.oracle.then(|| {
        let rates = x0.rates();
        let mut enc_gaps: Vec<f64> = Vec::new();
        for n in 0..batch.tokens() {
            for f in 0..batch.features() {
                let q = quantize_rate(RateValue::saturating(batch.rates().get(n, f))) as f64 / 256.0;
                enc_gaps.push((rates[n][f] - q).abs());
            }
        }
        let encoding_max = enc_gaps.iter().cloned().fold(0.0, f64::max);
        let attention_max = att_gaps.iter().cloned().fold(0.0, f64::max);
        let mut all: Vec<f64> = enc_gaps.iter().chain(&att_gaps).cloned().collect();
        OracleGap {
            encoding_max,
            attention_max,
            attention_median: median(&mut att_gaps.clone()),
            median: median(&mut all),
            max: encoding_max.max(attention_max),
            linear_exact,
        }
    });

    Ok(InferenceResult { steps, output_rates, class_scores, predicted_class, oracle, trace, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arch, BlockThresholds, LayerWeights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut impl Rng, n: usize, d: usize) -> TokenBatch {
        TokenBatch::from_rows(&(0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn encoding_extremes() {
        let zeros = TokenBatch::from_rows(&vec![vec![0.0; 4]; 2]).unwrap();
        assert_eq!(encode_inputs(&zeros, 32, 1).mean_rate(), 0.0);
        let ones = TokenBatch::from_rows(&vec![vec![1.0; 4]; 2]).unwrap();
        assert_eq!(encode_inputs(&ones, 32, 1).mean_rate(), 1.0);
    }

    #[test]
    fn encoding_recovers_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = random_batch(&mut rng, 4, 8);
        let steps = 10_000;
        let rates = encode_inputs(&batch, steps, 7).rates();
        for n in 0..4 {
            for f in 0..8 {
                let p = quantize_rate(RateValue::saturating(batch.rates().get(n, f))) as f64 / 256.0;
                let sigma = (p * (1.0 - p) / steps as f64).sqrt();
                assert!((rates[n][f] - p).abs() <= 4.0 * sigma + 1e-12);
            }
        }
    }

    #[test]
    fn zero_weights_pass_the_residual_through() {
        let cfg = ModelConfig::new(Arch::Encoder, 2, 16, 2, 4, 32);
        let blocks = vec![LayerWeights::zeros(&cfg, BlockThresholds::uniform(1)); 2];
        let model = Model { config: cfg.clone(), blocks, classifier: None, position: None };
        let pm = ProgrammedModel::program(model, &HwConfig::ideal(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = random_batch(&mut rng, 4, 16);
        let res = run_inference(&pm, &batch, 0.0, &RunOptions::default()).unwrap();
        assert_eq!(res.output_rates, encode_inputs(&batch, 32, 5).rates());
    }

    #[test]
    fn zero_projections_silence_attention() {
        let cfg = ModelConfig::new(Arch::Encoder, 1, 8, 2, 4, 16);
        let model = Model { config: cfg.clone(), blocks: vec![LayerWeights::zeros(&cfg, BlockThresholds::uniform(1))], classifier: None, position: None };
        let pm = ProgrammedModel::program(model, &HwConfig::ideal(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = encode_inputs(&random_batch(&mut rng, 4, 8), 16, 1);
        let block = &pm.blocks[0];
        let readouts = [
            block.q.readouts(0.0).unwrap(),
            block.k.readouts(0.0).unwrap(),
            block.v.readouts(0.0).unwrap(),
            block.o.readouts(0.0).unwrap(),
            block.ffn1.readouts(0.0).unwrap(),
            block.ffn2.readouts(0.0).unwrap(),
        ];
        let silent = SpikeTensor::zeros(4, 16, 8);
        let out = mhsa(&x, block, &readouts, &cfg, 1, 0, &silent, None).unwrap();
        assert_eq!(out.concat.mean_rate(), 0.0);
        assert_eq!(out.output.mean_rate(), 0.0);
    }

    #[test]
    fn single_head_equals_the_head_pipeline() {
        let cfg = ModelConfig::new(Arch::Encoder, 1, 8, 1, 4, 64);
        let model = Model::random(cfg.clone(), 4, 15);
        let pm = ProgrammedModel::program(model, &HwConfig::ideal(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = encode_inputs(&random_batch(&mut rng, 4, 8), 64, 4);
        let b = &pm.blocks[0];
        let readouts = [b.q.readouts(0.0).unwrap(), b.k.readouts(0.0).unwrap(), b.v.readouts(0.0).unwrap(), b.o.readouts(0.0).unwrap(), b.ffn1.readouts(0.0).unwrap(), b.ffn2.readouts(0.0).unwrap()];
        let out = mhsa(&x, b, &readouts, &cfg, 4, 0, &x, None).unwrap();
        let (q, _) = b.q.forward(&x, 0.0, None, None).unwrap();
        let (k, _) = b.k.forward(&x, 0.0, None, None).unwrap();
        let (v, _) = b.v.forward(&x, 0.0, None, None).unwrap();
        let head = split_heads(&q, &k, &v, 1).remove(0);
        let ssa_cfg = SsaConfig::new(4, 8, false, 64).unwrap();
        let att = ssa_attend(&head, &ssa_cfg, &SsaStreams::new(4, 0, 0)).unwrap();
        let direct = SpikeTensor::from_fn(4, 64, 8, |n, t, d| att.a[t].get(d, n));
        assert_eq!(out.concat, direct);
    }

    #[test]
    fn oracle_tracking_on_ideal_hardware() {
        let cfg = ModelConfig::new(Arch::Encoder, 1, 8, 2, 4, 2048);
        let model = Model::random(cfg, 11, 15);
        let pm = ProgrammedModel::program(model, &HwConfig::ideal(), 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch = random_batch(&mut rng, 4, 8);
        let opts = RunOptions { oracle: true, ..RunOptions::default() };
        let res = run_inference(&pm, &batch, 0.0, &opts).unwrap();
        let gap = res.oracle.unwrap();
        assert_eq!(gap.linear_exact, Some(true));
        assert!(gap.attention_max < 0.05, "{gap:?}");
    }

    #[test]
    fn spike_or_residual_runs_exactly() {
        let mut cfg = ModelConfig::new(Arch::Decoder, 1, 8, 2, 4, 64);
        cfg.residual_mode = ResidualMode::SpikeOr;
        let pm = ProgrammedModel::program(Model::random(cfg, 3, 15), &HwConfig::ideal(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = RunOptions { oracle: true, ..RunOptions::default() };
        let res = run_inference(&pm, &random_batch(&mut rng, 4, 8), 0.0, &opts).unwrap();
        assert_eq!(res.oracle.unwrap().linear_exact, Some(true));
    }

    #[test]
    fn shape_and_step_errors() {
        let cfg = ModelConfig::new(Arch::Encoder, 1, 8, 2, 4, 8);
        let pm = ProgrammedModel::program(Model::random(cfg, 1, 15), &HwConfig::ideal(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let wrong = random_batch(&mut rng, 4, 6);
        assert!(matches!(run_inference(&pm, &wrong, 0.0, &RunOptions::default()), Err(Error::Shape(_))));
        let ok = random_batch(&mut rng, 4, 8);
        let opts = RunOptions { steps: Some(0), ..RunOptions::default() };
        assert!(run_inference(&pm, &ok, 0.0, &opts).is_err());
    }

    #[test]
    fn classifier_scores() {
        let mut cfg = ModelConfig::new(Arch::Encoder, 1, 8, 2, 4, 64);
        cfg.classes = Some(3);
        let pm = ProgrammedModel::program(Model::random(cfg, 2, 15), &HwConfig::default(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let opts = RunOptions { trace: true, ..RunOptions::default() };
        let res = run_inference(&pm, &random_batch(&mut rng, 4, 8), 100.0, &opts).unwrap();
        let scores = res.class_scores.unwrap();
        assert_eq!(scores.len(), 3);
        let best = res.predicted_class.unwrap();
        assert!(scores.iter().all(|&s| s <= scores[best]));
        assert!(res.trace.iter().any(|r| r.stage == "classifier"));
        assert!(res.trace.iter().all(|r| r.stage != "softmax" && r.stage != "layernorm"));
    }
}
