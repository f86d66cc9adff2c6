use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{device::drift_conductance, AdcMode, AimcConfig, DifferentialCell, DriftModel, NoiseModel, PcmDevice};
use crate::error::{Error, Result};
use crate::matrix::IntMatrix;

/// A `tile_dim x tile_dim` array of differential cells. Cell `(i, j)` sits on
/// input row `i` and output column `j`.
#[derive(Clone, Debug)]
pub struct CrossbarTile {
    pub dim: usize,
    pub cells: Vec<DifferentialCell>,
    pub cfg: AimcConfig,
    pub noise: NoiseModel,
    pub drift: DriftModel,
    pub t_prog: f64,
}

impl CrossbarTile {
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &DifferentialCell {
        &self.cells[i * self.dim + j]
    }

    /// Programmed integer weights (levels only, no noise or drift).
    pub fn programmed_weights(&self) -> IntMatrix {
        IntMatrix::from_fn(self.dim, self.dim, |i, j| self.cell(i, j).programmed_weight())
    }

    /// Conductances frozen at `t_now`, ready for repeated reads.
    pub fn readout(&self, t_now: f64) -> Result<TileReadout> {
        if t_now < self.t_prog {
            return Err(Error::TimeOrder { t_now, t_prog: self.t_prog });
        }
        let t0 = self.drift.t0;
        let mut effective = Vec::with_capacity(self.cells.len());
        let mut total = Vec::with_capacity(self.cells.len());
        for c in &self.cells {
            let gp = drift_conductance(&c.plus, t_now, t0)?;
            let gm = drift_conductance(&c.minus, t_now, t0)?;
            effective.push(gp - gm);
            total.push(gp + gm);
        }
        Ok(TileReadout {
            dim: self.dim,
            effective,
            total,
            cfg: self.cfg.clone(),
            read_sigma: self.noise.read(),
        })
    }
}

/// Snapshot of a tile's conductances at one instant.
#[derive(Clone, Debug)]
pub struct TileReadout {
    pub dim: usize,
    /// `g_plus - g_minus` per cell, row-major by input.
    pub effective: Vec<f64>,
    /// `g_plus + g_minus` per cell.
    pub total: Vec<f64>,
    pub cfg: AimcConfig,
    pub read_sigma: f64,
}

impl TileReadout {
    /// Analog column currents for a binary input, with per-read noise.
    pub fn currents<R: Rng + ?Sized>(&self, input: &[bool], rng: &mut R) -> Result<Vec<f64>> {
        if input.len() > self.dim {
            return Err(Error::Shape(format!("{} inputs for a {}-row tile", input.len(), self.dim)));
        }
        let mut acc = vec![0.0f64; self.dim];
        for (i, _) in input.iter().enumerate().filter(|(_, &b)| b) {
            let row = &self.effective[i * self.dim..(i + 1) * self.dim];
            for (a, g) in acc.iter_mut().zip(row) {
                *a += g;
            }
        }
        if self.read_sigma > 0.0 {
            let normal = Normal::new(0.0, self.read_sigma).expect("non-negative sigma");
            for a in acc.iter_mut() {
                *a += normal.sample(rng);
            }
        }
        Ok(acc)
    }

    /// Column currents followed by ADC conversion.
    pub fn mvm<R: Rng + ?Sized>(&self, input: &[bool], rng: &mut R) -> Result<Vec<i32>> {
        Ok(self.currents(input, rng)?.into_iter().map(|c| adc_convert(c, &self.cfg)).collect())
    }

    /// Sum of `g_plus + g_minus` down column `j` (all-ones probe, noise free).
    pub fn column_total(&self, j: usize) -> f64 {
        (0..self.dim).map(|i| self.total[i * self.dim + j]).sum()
    }
}

/// ADC transfer. Ideal mode rounds; quantized mode snaps to the signed code
/// grid times `adc_step`, saturating at the extreme codes.
pub fn adc_convert(current: f64, cfg: &AimcConfig) -> i32 {
    match cfg.adc_mode {
        AdcMode::Ideal => current.round() as i32,
        AdcMode::Quantized => {
            let (lo, hi) = cfg.adc_codes();
            let code = (current / cfg.adc_step).round().clamp(lo as f64, hi as f64);
            (code * cfg.adc_step).round() as i32
        }
    }
}

/// Program a weight block (`inputs x outputs`, at most `tile_dim` per side,
/// zero-padded) into a fresh tile.
pub fn program_crossbar<R: Rng + ?Sized>(
    block: &IntMatrix,
    cfg: &AimcConfig,
    noise: &NoiseModel,
    drift: &DriftModel,
    t_prog: f64,
    rng: &mut R,
) -> Result<CrossbarTile> {
    let dim = cfg.tile_dim;
    if block.rows() > dim || block.cols() > dim {
        return Err(Error::Shape(format!(
            "block {}x{} exceeds a {dim}x{dim} tile",
            block.rows(),
            block.cols()
        )));
    }
    let max_w = cfg.max_weight();
    if let Some(&bad) = block.as_slice().iter().find(|v| v.abs() > max_w) {
        return Err(Error::WeightRange { value: bad, max: max_w });
    }
    let prog = Normal::new(0.0, noise.prog()).expect("non-negative sigma");
    let nu = Normal::new(drift.nu_mean, drift.nu_sigma).expect("non-negative sigma");
    let device = |level: u8, rng: &mut R| {
        let mut g0 = level as f64;
        if noise.prog() > 0.0 {
            g0 = (g0 + prog.sample(rng)).max(0.0);
        }
        let nu = if drift.nu_sigma > 0.0 { nu.sample(rng).max(0.0) } else { drift.nu_mean.max(0.0) };
        PcmDevice { level, g0, t_prog, nu }
    };
    let mut cells = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let w = if i < block.rows() && j < block.cols() { block.get(i, j) } else { 0 };
            let (lp, lm) = DifferentialCell::levels(w);
            let plus = device(lp, rng);
            let minus = device(lm, rng);
            cells.push(DifferentialCell { plus, minus });
        }
    }
    Ok(CrossbarTile { dim, cells, cfg: cfg.clone(), noise: noise.clone(), drift: drift.clone(), t_prog })
}

/// One read of the tile at `t_now`. For repeated reads at a fixed time use
/// [`CrossbarTile::readout`] once and call [`TileReadout::mvm`].
pub fn crossbar_mvm<R: Rng + ?Sized>(tile: &CrossbarTile, input: &[bool], t_now: f64, rng: &mut R) -> Result<Vec<i32>> {
    tile.readout(t_now)?.mvm(input, rng)
}

/// Validate an integer spike vector.
pub fn bits_from_ints(values: &[i32]) -> Result<Vec<bool>> {
    values
        .iter()
        .map(|&v| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::NonBinaryInput(other)),
        })
        .collect()
}

/// ADC step that puts the 99.5th percentile of `|current|` at the top code.
pub fn calibrate_adc_step(currents: &[f64], cfg: &AimcConfig) -> f64 {
    let mut mags: Vec<f64> = currents.iter().map(|c| c.abs()).filter(|c| c.is_finite()).collect();
    if mags.is_empty() {
        return cfg.adc_step;
    }
    mags.sort_by(f64::total_cmp);
    let idx = ((mags.len() as f64 * 0.995).ceil() as usize).clamp(1, mags.len()) - 1;
    let (_, hi) = cfg.adc_codes();
    let step = mags[idx] / hi as f64;
    if step > 0.0 { step } else { cfg.adc_step }
}
