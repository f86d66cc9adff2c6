//! PCM crossbar in-memory computing: weight quantization, differential-pair
//! programming with noise and drift, shared-ADC readout, row-block mapping of
//! large layers with CSA accumulation into LIF banks, and global drift
//! compensation.

mod device;
mod gdc;
mod layer;
mod quant;
mod tile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use device::{drift_conductance, DifferentialCell, PcmDevice};
pub use gdc::{gdc_apply, gdc_calibrate, gdc_calibrate_per_tile, CalibrationRecord};
pub use layer::{build_mapping, layer_forward, AimcLayer, LayerStats, MappingPlan};
pub use quant::{quantize_weights, QuantizedWeights};
pub use tile::{adc_convert, bits_from_ints, calibrate_adc_step, crossbar_mvm, program_crossbar, CrossbarTile, TileReadout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdcMode {
    /// Round to the nearest integer with unlimited range.
    Ideal,
    /// Signed `adc_bits` grid scaled by `adc_step`, saturating.
    Quantized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AimcConfig {
    pub tile_dim: usize,
    pub conductance_bits: u32,
    pub weight_bits: u32,
    pub devices_per_cell: u32,
    pub adc_bits: u32,
    pub adc_sharing: usize,
    pub adc_mode: AdcMode,
    pub adc_step: f64,
}

impl Default for AimcConfig {
    fn default() -> Self {
        Self {
            tile_dim: 128,
            conductance_bits: 4,
            weight_bits: 5,
            devices_per_cell: 2,
            adc_bits: 5,
            adc_sharing: 8,
            adc_mode: AdcMode::Quantized,
            adc_step: 4.0,
        }
    }
}

impl AimcConfig {
    pub fn ideal() -> Self {
        Self { adc_mode: AdcMode::Ideal, ..Self::default() }
    }

    /// Largest programmable weight magnitude, one device at full level.
    pub fn max_weight(&self) -> i32 {
        (1 << self.conductance_bits) - 1
    }

    /// Code range of the signed ADC.
    pub fn adc_codes(&self) -> (i32, i32) {
        let half = 1i32 << (self.adc_bits - 1);
        (-half, half - 1)
    }

    /// ADC units (readout groups) per tile.
    pub fn adcs_per_tile(&self) -> usize {
        self.tile_dim / self.adc_sharing
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_dim == 0 {
            return Err(Error::Config("tile_dim must be positive".into()));
        }
        if !(1..=8).contains(&self.conductance_bits) {
            return Err(Error::Config("conductance_bits must be in 1..=8".into()));
        }
        if self.devices_per_cell != 2 {
            return Err(Error::Config("only differential pairs (2 devices per cell) are modelled".into()));
        }
        if self.weight_bits != self.conductance_bits + 1 {
            return Err(Error::Config(format!(
                "weight_bits {} is not representable by a pair of {}-bit devices",
                self.weight_bits, self.conductance_bits
            )));
        }
        if !(1..=16).contains(&self.adc_bits) {
            return Err(Error::Config("adc_bits must be in 1..=16".into()));
        }
        if self.adc_sharing == 0 || !self.tile_dim.is_multiple_of(self.adc_sharing) {
            return Err(Error::Config(format!(
                "adc_sharing {} must divide tile_dim {}",
                self.adc_sharing, self.tile_dim
            )));
        }
        if !(self.adc_step.is_finite() && self.adc_step > 0.0) {
            return Err(Error::Config("adc_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub enabled: bool,
    pub prog_sigma: f64,
    pub read_sigma: f64,
}

impl NoiseModel {
    pub fn off() -> Self {
        Self { enabled: false, prog_sigma: 0.0, read_sigma: 0.0 }
    }

    pub fn prog(&self) -> f64 {
        if self.enabled { self.prog_sigma } else { 0.0 }
    }

    pub fn read(&self) -> f64 {
        if self.enabled { self.read_sigma } else { 0.0 }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { enabled: true, prog_sigma: 0.45, read_sigma: 0.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftModel {
    pub nu_mean: f64,
    pub nu_sigma: f64,
    /// Reference time in seconds.
    pub t0: f64,
}

impl DriftModel {
    pub fn off() -> Self {
        Self { nu_mean: 0.0, nu_sigma: 0.0, t0: 1.0 }
    }
}

impl Default for DriftModel {
    fn default() -> Self {
        Self { nu_mean: 0.05, nu_sigma: 0.01, t0: 1.0 }
    }
}

/// Everything a hardware config file carries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct HwConfig {
    pub aimc: AimcConfig,
    pub noise: NoiseModel,
    pub drift: DriftModel,
}

impl HwConfig {
    /// All nonidealities off, ideal ADC.
    pub fn ideal() -> Self {
        Self { aimc: AimcConfig::ideal(), noise: NoiseModel::off(), drift: DriftModel::off() }
    }

    pub fn validate(&self) -> Result<()> {
        self.aimc.validate()?;
        let n = &self.noise;
        if !(n.prog_sigma >= 0.0 && n.read_sigma >= 0.0) {
            return Err(Error::Config("noise sigmas must be non-negative".into()));
        }
        let d = &self.drift;
        if !(d.t0 > 0.0) {
            return Err(Error::Config("drift t0 must be positive".into()));
        }
        if !(d.nu_mean >= 0.0 && d.nu_sigma >= 0.0) {
            return Err(Error::Config("drift exponent mean and sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let hw: Self = serde_json::from_str(text)?;
        hw.validate()?;
        Ok(hw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let c = AimcConfig::default();
        c.validate().unwrap();
        assert_eq!(c.max_weight(), 15);
        assert_eq!(c.adc_codes(), (-16, 15));
        assert_eq!(c.adcs_per_tile(), 16);
        HwConfig::default().validate().unwrap();
        HwConfig::ideal().validate().unwrap();
    }

    #[test]
    fn rejects_inconsistent_widths() {
        let c = AimcConfig { weight_bits: 8, ..AimcConfig::default() };
        assert!(c.validate().is_err());
        let c = AimcConfig { adc_sharing: 7, ..AimcConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_rejects_unknown_fields() {
        let mut v = serde_json::to_value(HwConfig::default()).unwrap();
        assert_eq!(HwConfig::from_json(&v.to_string()).unwrap(), HwConfig::default());
        v["noise"]["bogus"] = 1.into();
        assert!(HwConfig::from_json(&v.to_string()).is_err());
    }
}
