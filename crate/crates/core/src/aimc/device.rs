use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One PCM device. Conductances are normalized so level `k` programs to `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcmDevice {
    pub level: u8,
    pub g0: f64,
    pub t_prog: f64,
    pub nu: f64,
}

impl PcmDevice {
    pub fn ideal(level: u8, t_prog: f64) -> Self {
        Self { level, g0: level as f64, t_prog, nu: 0.0 }
    }
}

/// Power-law drift: `g0 * ((t_now - t_prog + t0) / t0)^(-nu)`.
pub fn drift_conductance(dev: &PcmDevice, t_now: f64, t0: f64) -> Result<f64> {
    if t_now < dev.t_prog {
        return Err(Error::TimeOrder { t_now, t_prog: dev.t_prog });
    }
    if dev.nu == 0.0 || t_now == dev.t_prog {
        return Ok(dev.g0);
    }
    Ok(dev.g0 * ((t_now - dev.t_prog + t0) / t0).powf(-dev.nu))
}

/// Signed weight stored as `g_plus - g_minus`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialCell {
    pub plus: PcmDevice,
    pub minus: PcmDevice,
}

impl DifferentialCell {
    /// Canonical split: the unused device stays at level 0.
    pub fn levels(w: i32) -> (u8, u8) {
        if w >= 0 {
            (w as u8, 0)
        } else {
            (0, (-w) as u8)
        }
    }

    pub fn programmed_weight(&self) -> i32 {
        self.plus.level as i32 - self.minus.level as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_elapsed_time_no_drift() {
        let d = PcmDevice { level: 10, g0: 9.7, t_prog: 5.0, nu: 0.05 };
        assert_eq!(drift_conductance(&d, 5.0, 1.0).unwrap(), 9.7);
    }

    #[test]
    fn zero_exponent_is_static() {
        let d = PcmDevice { level: 3, g0: 3.2, t_prog: 0.0, nu: 0.0 };
        for t in [0.0, 1.0, 1e3, 1e9] {
            assert_eq!(drift_conductance(&d, t, 1.0).unwrap(), 3.2);
        }
    }

    #[test]
    fn one_million_seconds() {
        let d = PcmDevice { level: 10, g0: 10.0, t_prog: 0.0, nu: 0.05 };
        // elapsed 1e6 - 1 with t0 = 1 makes the ratio exactly 1e6
        let g = drift_conductance(&d, 1e6 - 1.0, 1.0).unwrap();
        assert!((g - 10.0 * 1e6f64.powf(-0.05)).abs() < 1e-12);
        assert!((g - 5.012).abs() < 1e-3);
    }

    #[test]
    fn strictly_decreasing_for_positive_exponent() {
        let d = PcmDevice { level: 15, g0: 15.0, t_prog: 0.0, nu: 0.03 };
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let g = drift_conductance(&d, 10f64.powi(k), 1.0).unwrap();
            assert!(g < prev && g >= 0.0);
            prev = g;
        }
    }

    #[test]
    fn reading_before_programming_fails() {
        let d = PcmDevice::ideal(1, 10.0);
        assert!(matches!(drift_conductance(&d, 9.0, 1.0), Err(Error::TimeOrder { .. })));
    }

    #[test]
    fn canonical_split() {
        assert_eq!(DifferentialCell::levels(3), (3, 0));
        assert_eq!(DifferentialCell::levels(-7), (0, 7));
        assert_eq!(DifferentialCell::levels(0), (0, 0));
    }
}
