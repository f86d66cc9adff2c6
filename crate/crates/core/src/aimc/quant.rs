use serde::{Deserialize, Serialize};

use crate::matrix::{IntMatrix, RealMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedWeights {
    pub ints: IntMatrix,
    pub scale: f64,
}

impl QuantizedWeights {
    pub fn dequantize(&self) -> RealMatrix {
        RealMatrix::from_fn(self.ints.rows(), self.ints.cols(), |r, c| self.ints.get(r, c) as f64 * self.scale)
    }
}

/// Symmetric per-layer quantization to `[-max_level, max_level]` with scale
/// `max|W| / max_level`, rounding half away from zero. An all-zero matrix
/// gets scale 1.
pub fn quantize_weights(w: &RealMatrix, max_level: i32) -> QuantizedWeights {
    let peak = w.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { peak / max_level as f64 } else { 1.0 };
    let ints = IntMatrix::from_fn(w.rows(), w.cols(), |r, c| {
        ((w.get(r, c) / scale).round() as i32).clamp(-max_level, max_level)
    });
    QuantizedWeights { ints, scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_matrix() {
        let q = quantize_weights(&RealMatrix::zeros(3, 4), 15);
        assert!(q.ints.is_zero());
        assert_eq!(q.scale, 1.0);
    }

    #[test]
    fn integer_matrix_at_full_range_is_unchanged() {
        let w = RealMatrix::from_fn(4, 4, |r, c| ((r * 4 + c) as f64) - 7.0 + if r == 3 && c == 3 { 7.0 } else { 0.0 });
        assert_eq!(w.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())), 15.0);
        let q = quantize_weights(&w, 15);
        assert_eq!(q.scale, 1.0);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(q.ints.get(r, c) as f64, w.get(r, c));
            }
        }
    }

    #[test]
    fn halves_round_away_from_zero() {
        let w = RealMatrix::from_rows(&[vec![15.0, 2.5, -2.5, 0.5, -0.5]]).unwrap();
        let q = quantize_weights(&w, 15);
        assert_eq!(q.ints.as_slice(), &[15, 3, -3, 1, -1]);
    }

    proptest! {
        #[test]
        fn dequantized_error_is_half_a_step(vals in prop::collection::vec(-3.0f64..3.0, 1..64)) {
            let w = RealMatrix::from_vec(1, vals.len(), vals).unwrap();
            let q = quantize_weights(&w, 15);
            let back = q.dequantize();
            prop_assert!(q.ints.max_abs() <= 15);
            prop_assert!(w.max_abs_diff(&back) <= q.scale / 2.0 + 1e-12);
        }
    }
}
