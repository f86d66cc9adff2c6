use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gdc_apply, program_crossbar, AimcConfig, CalibrationRecord, CrossbarTile, HwConfig, TileReadout};
use crate::error::{Error, Result};
use crate::matrix::IntMatrix;
use crate::spike::{domain, mix_seed, unit_base, LifNeuron, SpikeTensor};

/// Partition of an `outputs x inputs` weight matrix into crossbar blocks.
/// Block `(rb, cb)` holds outputs `rb*dim..` and inputs `cb*dim..`; all blocks
/// of one row-block feed the same bank of LIF neurons.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingPlan {
    pub rows: usize,
    pub cols: usize,
    pub tile_dim: usize,
    pub row_blocks: usize,
    pub col_blocks: usize,
}

impl MappingPlan {
    pub fn tile_count(&self) -> usize {
        self.row_blocks * self.col_blocks
    }

    pub fn tile_id(&self, rb: usize, cb: usize) -> usize {
        rb * self.col_blocks + cb
    }

    /// Tile ids per spiking-neuron tile (one group per row-block).
    pub fn neuron_tiles(&self) -> Vec<Vec<usize>> {
        (0..self.row_blocks)
            .map(|rb| (0..self.col_blocks).map(|cb| self.tile_id(rb, cb)).collect())
            .collect()
    }

    pub fn padded_shape(&self) -> (usize, usize) {
        (self.row_blocks * self.tile_dim, self.col_blocks * self.tile_dim)
    }

    /// Block `(rb, cb)` in crossbar orientation: crossbar row = input,
    /// crossbar column = output. Edge blocks come back smaller; the tile pads.
    pub fn block(&self, w: &IntMatrix, rb: usize, cb: usize) -> IntMatrix {
        let d = self.tile_dim;
        let n_in = d.min(self.cols - cb * d);
        let n_out = d.min(self.rows - rb * d);
        IntMatrix::from_fn(n_in, n_out, |i, j| w.get(rb * d + j, cb * d + i))
    }
}

/// Ceil-divide a layer into tile-sized blocks.
pub fn build_mapping(rows: usize, cols: usize, cfg: &AimcConfig) -> Result<MappingPlan> {
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!("cannot map a {rows}x{cols} layer")));
    }
    let d = cfg.tile_dim;
    Ok(MappingPlan { rows, cols, tile_dim: d, row_blocks: rows.div_ceil(d), col_blocks: cols.div_ceil(d) })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    pub input_spikes: u64,
    pub output_spikes: u64,
    pub column_reads: u64,
    pub csa_adds: u64,
    pub lif_updates: u64,
    /// ADC multiplexer rounds; tiles in a layer read out in parallel.
    pub mux_rounds: u64,
}

impl LayerStats {
    pub fn merge(&mut self, o: &Self) {
        self.input_spikes += o.input_spikes;
        self.output_spikes += o.output_spikes;
        self.column_reads += o.column_reads;
        self.csa_adds += o.csa_adds;
        self.lif_updates += o.lif_updates;
        self.mux_rounds += o.mux_rounds;
    }
}

/// A programmed linear layer followed by its LIF bank.
#[derive(Clone, Debug)]
pub struct AimcLayer {
    pub plan: MappingPlan,
    pub tiles: Vec<CrossbarTile>,
    pub threshold: i32,
    pub leak_shift: u32,
    tile_seeds: Vec<u64>,
}

impl AimcLayer {
    /// Program an `outputs x inputs` integer weight matrix.
    pub fn program(
        weights: &IntMatrix,
        threshold: i32,
        hw: &HwConfig,
        seed: u64,
        layer_uid: u64,
        t_prog: f64,
    ) -> Result<Self> {
        hw.validate()?;
        LifNeuron::new(threshold, 1)?;
        let plan = build_mapping(weights.rows(), weights.cols(), &hw.aimc)?;
        let base = unit_base(domain::CROSSBAR, layer_uid, 0);
        let tile_seeds: Vec<u64> = (0..plan.tile_count()).map(|k| mix_seed(seed, base + k as u64)).collect();
        let tiles = (0..plan.tile_count())
            .into_par_iter()
            .map(|k| {
                let (rb, cb) = (k / plan.col_blocks, k % plan.col_blocks);
                let mut rng = ChaCha8Rng::seed_from_u64(tile_seeds[k]);
                program_crossbar(&plan.block(weights, rb, cb), &hw.aimc, &hw.noise, &hw.drift, t_prog, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { plan, tiles, threshold, leak_shift: 1, tile_seeds })
    }

    pub fn inputs(&self) -> usize {
        self.plan.cols
    }

    pub fn outputs(&self) -> usize {
        self.plan.rows
    }

    pub fn readouts(&self, t_now: f64) -> Result<Vec<TileReadout>> {
        self.tiles.par_iter().map(|t| t.readout(t_now)).collect()
    }

    /// Token-major forward pass; see [`layer_forward`].
    pub fn forward(
        &self,
        inputs: &SpikeTensor,
        t_now: f64,
        calib: Option<&CalibrationRecord>,
        residual: Option<&SpikeTensor>,
    ) -> Result<(SpikeTensor, LayerStats)> {
        let readouts = self.readouts(t_now)?;
        self.forward_with(&readouts, inputs, calib, residual)
    }

    /// Forward pass against precomputed readouts.
    pub fn forward_with(
        &self,
        readouts: &[TileReadout],
        inputs: &SpikeTensor,
        calib: Option<&CalibrationRecord>,
        residual: Option<&SpikeTensor>,
    ) -> Result<(SpikeTensor, LayerStats)> {
        let plan = &self.plan;
        if inputs.features() != plan.cols {
            return Err(Error::Shape(format!(
                "layer takes {} inputs, got {}",
                plan.cols,
                inputs.features()
            )));
        }
        if let Some(r) = residual {
            if (r.tokens(), r.steps(), r.features()) != (inputs.tokens(), inputs.steps(), plan.rows) {
                return Err(Error::Shape("residual shape does not match layer output".into()));
            }
        }
        let per_tile = calib.and_then(|c| c.per_tile.as_deref());
        if let Some(p) = per_tile {
            if p.len() != plan.tile_count() {
                return Err(Error::Shape(format!(
                    "per-tile calibration has {} entries for {} tiles",
                    p.len(),
                    plan.tile_count()
                )));
            }
        }
        let global = if per_tile.is_some() { None } else { calib };
        let (steps, d) = (inputs.steps(), plan.tile_dim);

        let blocks: Vec<Vec<bool>> = (0..inputs.tokens())
            .into_par_iter()
            .map(|n| -> Result<Vec<bool>> {
                let mut rngs: Vec<ChaCha8Rng> = self
                    .tile_seeds
                    .iter()
                    .map(|&s| {
                        let mut r = ChaCha8Rng::seed_from_u64(s);
                        r.set_stream(n as u64 + 1);
                        r
                    })
                    .collect();
                // LIF state resets on every token switch.
                let mut bank = vec![LifNeuron::new(self.threshold, self.leak_shift)?; plan.rows];
                let mut out = Vec::with_capacity(steps * plan.rows);
                let mut sums = vec![0i64; plan.rows];
                for t in 0..steps {
                    let frame = inputs.frame(n, t);
                    sums.iter_mut().for_each(|s| *s = 0);
                    for rb in 0..plan.row_blocks {
                        let width = d.min(plan.rows - rb * d);
                        for cb in 0..plan.col_blocks {
                            let k = plan.tile_id(rb, cb);
                            let sub = &frame[cb * d..plan.cols.min((cb + 1) * d)];
                            let col = readouts[k].mvm(sub, &mut rngs[k])?;
                            for j in 0..width {
                                let v = col[j] as i64;
                                sums[rb * d + j] += match per_tile {
                                    Some(p) => (v as f64 * p[k]).round() as i64,
                                    None => v,
                                };
                            }
                        }
                    }
                    for (j, neuron) in bank.iter_mut().enumerate() {
                        let mut current = match global {
                            Some(rec) => gdc_apply(sums[j], rec),
                            None => sums[j],
                        };
                        if let Some(r) = residual {
                            current += r.get(n, t, j) as i64;
                        }
                        let current = i32::try_from(current)
                            .map_err(|_| Error::Shape(format!("pre-activation {current} exceeds 32 bits")))?;
                        out.push(neuron.step(current));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        let output = SpikeTensor::from_token_blocks(steps, plan.rows, blocks)?;
        let work = (inputs.tokens() * steps) as u64;
        let stats = LayerStats {
            input_spikes: (0..inputs.tokens()).map(|n| inputs.token(n).iter().filter(|&&b| b).count() as u64).sum(),
            output_spikes: (0..output.tokens()).map(|n| output.token(n).iter().filter(|&&b| b).count() as u64).sum(),
            column_reads: work * (plan.tile_count() * d) as u64,
            csa_adds: work * (plan.rows * plan.col_blocks) as u64,
            lif_updates: work * plan.rows as u64,
            mux_rounds: work * readouts.first().map_or(0, |r| r.cfg.adc_sharing) as u64,
        };
        Ok((output, stats))
    }
}

/// Run one programmed layer over all tokens and steps (tokens outer, steps
/// inner), CSA-summing partial column outputs across each row-block, applying
/// drift compensation when a record is given, and stepping the LIF bank.
pub fn layer_forward(
    layer: &AimcLayer,
    inputs: &SpikeTensor,
    t_now: f64,
    calib: Option<&CalibrationRecord>,
) -> Result<(SpikeTensor, LayerStats)> {
    layer.forward(inputs, t_now, calib, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::reference_lif_layer;
    use rand::Rng;

    #[test]
    fn mapping_shapes() {
        let cfg = AimcConfig::default();
        let p = build_mapping(384, 512, &cfg).unwrap();
        assert_eq!((p.row_blocks, p.col_blocks, p.tile_count()), (3, 4, 12));
        let groups = p.neuron_tiles();
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().all(|g| g.len() == 4));
        assert_eq!(build_mapping(128, 128, &cfg).unwrap().tile_count(), 1);
        let p = build_mapping(129, 1, &cfg).unwrap();
        assert_eq!((p.row_blocks, p.col_blocks), (2, 1));
        assert_eq!(p.padded_shape(), (256, 128));
        assert!(build_mapping(0, 3, &cfg).is_err());
    }

    #[test]
    fn blocks_cover_the_matrix() {
        let cfg = AimcConfig { tile_dim: 4, adc_sharing: 2, ..AimcConfig::ideal() };
        let w = IntMatrix::from_fn(7, 10, |r, c| (r * 10 + c) as i32 % 31 - 15);
        let p = build_mapping(7, 10, &cfg).unwrap();
        let mut seen = IntMatrix::zeros(7, 10);
        for rb in 0..p.row_blocks {
            for cb in 0..p.col_blocks {
                let b = p.block(&w, rb, cb);
                for i in 0..b.rows() {
                    for j in 0..b.cols() {
                        let (r, c) = (rb * 4 + j, cb * 4 + i);
                        assert_eq!(b.get(i, j), w.get(r, c));
                        seen.set(r, c, seen.get(r, c) + 1);
                    }
                }
            }
        }
        assert!(seen.as_slice().iter().all(|&v| v == 1));
    }

    fn random_spikes(rng: &mut impl Rng, tokens: usize, steps: usize, features: usize, p: f64) -> SpikeTensor {
        SpikeTensor::from_fn(tokens, steps, features, |_, _, _| rng.random_bool(p))
    }

    #[test]
    fn zero_weights_stay_silent() {
        let layer = AimcLayer::program(&IntMatrix::zeros(20, 30), 1, &HwConfig::ideal(), 1, 0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_spikes(&mut rng, 3, 8, 30, 0.5);
        let (y, stats) = layer_forward(&layer, &x, 0.0, None).unwrap();
        assert_eq!(stats.output_spikes, 0);
        assert_eq!(y.features(), 20);
    }

    #[test]
    fn single_block_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = IntMatrix::from_fn(128, 128, |_, _| rng.random_range(-15..=15));
        let layer = AimcLayer::program(&w, 1, &HwConfig::ideal(), 1, 0, 0.0).unwrap();
        let x = random_spikes(&mut rng, 2, 16, 128, 0.3);
        let (y, _) = layer_forward(&layer, &x, 0.0, None).unwrap();
        assert_eq!(y, reference_lif_layer(&w, 1, &x, None).unwrap());
    }

    #[test]
    fn partition_invariance_on_ragged_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (rows, cols) in [(129, 1), (200, 300), (3, 257)] {
            let w = IntMatrix::from_fn(rows, cols, |_, _| rng.random_range(-15..=15));
            let threshold = rng.random_range(1..20);
            let layer = AimcLayer::program(&w, threshold, &HwConfig::ideal(), 9, 2, 0.0).unwrap();
            let x = random_spikes(&mut rng, 2, 6, cols, 0.4);
            let res = random_spikes(&mut rng, 2, 6, rows, 0.5);
            let (y, stats) = layer.forward(&x, 0.0, None, Some(&res)).unwrap();
            assert_eq!(y, reference_lif_layer(&w, threshold, &x, Some(&res)).unwrap());
            let plan = &layer.plan;
            assert_eq!(stats.column_reads, (2 * 6 * plan.tile_count() * 128) as u64);
        }
    }

    #[test]
    fn input_width_is_checked() {
        let layer = AimcLayer::program(&IntMatrix::zeros(4, 8), 1, &HwConfig::ideal(), 1, 0, 0.0).unwrap();
        let x = SpikeTensor::zeros(1, 1, 7);
        assert!(matches!(layer_forward(&layer, &x, 0.0, None), Err(Error::Shape(_))));
    }

    #[test]
    fn noisy_forward_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = IntMatrix::from_fn(64, 200, |_, _| rng.random_range(-15..=15));
        let x = random_spikes(&mut rng, 4, 8, 200, 0.3);
        let hw = HwConfig::default();
        let a = AimcLayer::program(&w, 8, &hw, 3, 1, 0.0).unwrap();
        let b = AimcLayer::program(&w, 8, &hw, 3, 1, 0.0).unwrap();
        let ya = a.forward(&x, 1e4, None, None).unwrap();
        let yb = b.forward(&x, 1e4, None, None).unwrap();
        assert_eq!(ya, yb);
        // one token's result does not depend on the other tokens
        let single = SpikeTensor::from_token_blocks(8, 200, vec![x.token(0).to_vec()]).unwrap();
        let (ys, _) = a.forward(&single, 1e4, None, None).unwrap();
        assert_eq!(ys.token(0), ya.0.token(0));
    }
}
