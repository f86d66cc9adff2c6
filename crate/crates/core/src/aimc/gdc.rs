use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::CrossbarTile;
use crate::error::{Error, Result};

/// Output scale from one global drift-compensation measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub alpha: f64,
    pub t_cal: f64,
    /// `(tile index, column)` pairs that were probed.
    pub probed_columns: Vec<(usize, usize)>,
    /// Experimental: one scale per tile, applied before accumulation instead
    /// of the global `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_tile: Option<Vec<f64>>,
}

impl CalibrationRecord {
    pub fn identity(t_cal: f64) -> Self {
        Self { alpha: 1.0, t_cal, probed_columns: Vec::new(), per_tile: None }
    }
}

/// `round(sum * alpha)`.
pub fn gdc_apply(sum: i64, rec: &CalibrationRecord) -> i64 {
    (sum as f64 * rec.alpha).round() as i64
}

const CALIB_STREAM: u64 = u64::MAX;

/// Drive the all-ones probe into up to `probes` programmed columns (evenly
/// strided over every tile) and compare the measured current with the ideal
/// level sum. Each differential column is read as its two physical device
/// columns, so the measurement is of `g_plus + g_minus` and cannot cancel.
pub fn gdc_calibrate(tiles: &[&CrossbarTile], probes: usize, t_now: f64, seed: u64) -> Result<CalibrationRecord> {
    if probes == 0 {
        return Err(Error::Config("at least one probe column is required".into()));
    }
    let ideal_total = |tile: &CrossbarTile, j: usize| -> f64 {
        (0..tile.dim).map(|i| {
            let c = tile.cell(i, j);
            (c.plus.level + c.minus.level) as f64
        })
        .sum()
    };
    let candidates: Vec<(usize, usize)> = tiles
        .iter()
        .enumerate()
        .flat_map(|(k, t)| (0..t.dim).map(move |j| (k, j)))
        .filter(|&(k, j)| ideal_total(tiles[k], j) > 0.0)
        .collect();
    if candidates.is_empty() {
        log::warn!("no programmed columns to probe; drift compensation disabled");
        return Ok(CalibrationRecord::identity(t_now));
    }
    let m = probes.min(candidates.len());
    let picked: Vec<(usize, usize)> = (0..m).map(|s| candidates[s * candidates.len() / m]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CALIB_STREAM);
    let mut ideal = 0.0;
    let mut measured = 0.0;
    let mut cached: Option<(usize, super::TileReadout)> = None;
    for &(k, j) in &picked {
        if cached.as_ref().map(|c| c.0) != Some(k) {
            cached = Some((k, tiles[k].readout(t_now)?));
        }
        let readout = &cached.as_ref().expect("just filled").1;
        ideal += ideal_total(tiles[k], j);
        measured += readout.column_total(j);
        if readout.read_sigma > 0.0 {
            let n = Normal::new(0.0, readout.read_sigma).expect("non-negative sigma");
            measured += n.sample(&mut rng) + n.sample(&mut rng);
        }
    }
    let alpha = if measured > 0.0 {
        ideal / measured
    } else {
        log::warn!("probe current is {measured}; using alpha = 1");
        1.0
    };
    Ok(CalibrationRecord { alpha, t_cal: t_now, probed_columns: picked, per_tile: None })
}

/// Experimental per-tile variant: every tile gets its own scale from its own
/// programmed columns. `alpha` holds the global value for reference.
pub fn gdc_calibrate_per_tile(tiles: &[&CrossbarTile], probes_per_tile: usize, t_now: f64, seed: u64) -> Result<CalibrationRecord> {
    let mut global = gdc_calibrate(tiles, probes_per_tile * tiles.len().max(1), t_now, seed)?;
    let per_tile = tiles
        .iter()
        .enumerate()
        .map(|(k, t)| gdc_calibrate(&[*t], probes_per_tile, t_now, seed ^ (k as u64 + 1)).map(|r| r.alpha))
        .collect::<Result<Vec<_>>>()?;
    global.per_tile = Some(per_tile);
    Ok(global)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aimc::{program_crossbar, AimcConfig, DriftModel, NoiseModel};
    use crate::matrix::IntMatrix;
    use rand::Rng;

    fn tile(w: &IntMatrix, drift: &DriftModel, seed: u64) -> CrossbarTile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        program_crossbar(w, &AimcConfig::ideal(), &NoiseModel::off(), drift, 0.0, &mut rng).unwrap()
    }

    #[test]
    fn apply_rounding() {
        let rec = |a| CalibrationRecord { alpha: a, ..CalibrationRecord::identity(0.0) };
        assert_eq!(gdc_apply(100, &rec(1.0)), 100);
        assert_eq!(gdc_apply(100, &rec(1.25)), 125);
        assert_eq!(gdc_apply(101, &rec(1.25)), 126);
        assert_eq!(gdc_apply(-101, &rec(1.25)), -126);
    }

    #[test]
    fn no_drift_means_unit_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = IntMatrix::from_fn(128, 128, |_, _| rng.random_range(-15..=15));
        let t = tile(&w, &DriftModel::off(), 2);
        let rec = gdc_calibrate(&[&t], 16, 1e6, 0).unwrap();
        assert_eq!(rec.alpha, 1.0);
        assert_eq!(rec.probed_columns.len(), 16);
    }

    #[test]
    fn uniform_decay_is_undone() {
        // nu chosen so the decay factor at t = 1e6 - 1 (t0 = 1) is exactly 0.8
        let nu = 1.25f64.ln() / 1e6f64.ln();
        let drift = DriftModel { nu_mean: nu, nu_sigma: 0.0, t0: 1.0 };
        // row sums that are multiples of 5 keep 0.8 * sum integral
        let w = IntMatrix::from_fn(128, 128, |i, j| if (i + j) % 3 == 0 { 5 } else if (i + j) % 3 == 1 { -10 } else { 0 });
        let t = tile(&w, &drift, 3);
        let t_now = 1e6 - 1.0;
        let rec = gdc_calibrate(&[&t], 32, t_now, 0).unwrap();
        assert!((rec.alpha - 1.25).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let readout = t.readout(t_now).unwrap();
        for _ in 0..20 {
            let input: Vec<bool> = (0..128).map(|_| rng.random()).collect();
            let got = readout.mvm(&input, &mut rng).unwrap();
            let ideal = crate::oracle::ideal_mvm_int(&w, &input).unwrap();
            for (g, i) in got.iter().zip(ideal) {
                assert_eq!(gdc_apply(*g as i64, &rec), i);
            }
        }
    }

    #[test]
    fn empty_tiles_fall_back_to_unit_scale() {
        let t = tile(&IntMatrix::zeros(4, 4), &DriftModel::default(), 1);
        let rec = gdc_calibrate(&[&t], 8, 10.0, 0).unwrap();
        assert_eq!(rec.alpha, 1.0);
        assert!(gdc_calibrate(&[&t], 0, 10.0, 0).is_err());
    }

    #[test]
    fn record_round_trips_through_json() {
        let rec = CalibrationRecord { alpha: 1.37, t_cal: 3600.0, probed_columns: vec![(0, 3), (2, 127)], per_tile: None };
        let text = serde_json::to_string(&rec).unwrap();
        assert_eq!(serde_json::from_str::<CalibrationRecord>(&text).unwrap(), rec);
    }

    #[test]
    fn stochastic_drift_error_shrinks() {
        let drift = DriftModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w = IntMatrix::from_fn(128, 128, |_, _| rng.random_range(-15..=15));
        let t = tile(&w, &drift, 11);
        let t_now = 1e5;
        let rec = gdc_calibrate(&[&t], 64, t_now, 0).unwrap();
        assert!(rec.alpha > 1.0);
        let readout = t.readout(t_now).unwrap();
        let (mut pre, mut post, mut norm) = (0.0, 0.0, 0.0);
        for _ in 0..100 {
            let input: Vec<bool> = (0..128).map(|_| rng.random()).collect();
            let got = readout.mvm(&input, &mut rng).unwrap();
            let ideal = crate::oracle::ideal_mvm_int(&w, &input).unwrap();
            for (g, i) in got.iter().zip(ideal) {
                pre += (*g as i64 - i).abs() as f64;
                post += (gdc_apply(*g as i64, &rec) - i).abs() as f64;
                norm += i.abs() as f64;
            }
        }
        assert!(post / norm < pre / norm, "pre {} post {}", pre / norm, post / norm);
    }
}
