//! Spike coding, LIF dynamics, pseudo-random streams and stochastic-computing
//! primitives shared by the AIMC and SSA engines.

mod encoder;
mod lfsr;
mod lif;
mod tensor;

pub use encoder::{bernoulli_encode, bernoulli_sample_int, quantize_rate, BernoulliEncoder};
pub use lfsr::{lfsr_step, mix_seed, splitmix64, LfsrStream, TAPS_32_22_2_1};
pub use lif::LifNeuron;
pub use tensor::{BitMatrix, SpikeTensor};

/// Stream-id domains; keeps the id spaces of different consumers disjoint.
pub mod domain {
    pub const INPUT_ENCODER: u64 = 1;
    pub const ATTENTION: u64 = 2;
    pub const CROSSBAR: u64 = 3;
}

/// Base unit id for one (domain, layer, head) partition. The low 32 bits are
/// left for the consumer's local index.
pub fn unit_base(domain: u64, layer: u64, head: u64) -> u64 {
    (domain << 56) | ((layer & 0xFFFF) << 40) | ((head & 0xFF) << 32)
}

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A firing probability in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RateValue(f64);

impl RateValue {
    pub const ZERO: RateValue = RateValue(0.0);
    pub const ONE: RateValue = RateValue(1.0);

    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(RateValue(x))
        } else {
            Err(Error::Config(format!("rate {x} outside [0, 1]")))
        }
    }

    /// Clamp into `[0, 1]`; NaN maps to 0.
    pub fn saturating(x: f64) -> Self {
        if x.is_nan() {
            RateValue(0.0)
        } else {
            RateValue(x.clamp(0.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A length-`T` binary sequence.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SpikeTrain {
    bits: Vec<bool>,
}

impl SpikeTrain {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn ones(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

impl FromIterator<bool> for SpikeTrain {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self { bits: iter.into_iter().collect() }
    }
}

/// Bitwise AND of two equally long trains. For independent operands the output
/// rate is the product of the input rates; for correlated operands it is not
/// (`a ∧ a = a`).
pub fn stochastic_and(a: &SpikeTrain, b: &SpikeTrain) -> Result<SpikeTrain> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.bits.iter().zip(&b.bits).map(|(&x, &y)| x && y).collect())
}

/// Time-averaged firing rate. An empty train decodes to 0.
pub fn rate_of(s: &SpikeTrain) -> RateValue {
    if s.is_empty() {
        return RateValue::ZERO;
    }
    RateValue(s.count_ones() as f64 / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_basic() {
        assert_eq!(rate_of(&SpikeTrain::zeros(9)).get(), 0.0);
        assert_eq!(rate_of(&SpikeTrain::ones(9)).get(), 1.0);
        let s = SpikeTrain::new(vec![true, false, true, false]);
        assert_eq!(rate_of(&s).get(), 0.5);
    }

    #[test]
    fn and_with_ones_is_identity() {
        let mut stream = LfsrStream::for_unit(1, 1);
        let b = bernoulli_encode(RateValue::new(0.3).unwrap(), 500, &mut stream);
        let out = stochastic_and(&SpikeTrain::ones(500), &b).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn and_is_idempotent_on_the_same_train() {
        let mut stream = LfsrStream::for_unit(5, 9);
        let a = bernoulli_encode(RateValue::new(0.5).unwrap(), 4000, &mut stream);
        let out = stochastic_and(&a, &a).unwrap();
        assert_eq!(rate_of(&out), rate_of(&a));
    }

    #[test]
    fn and_of_independent_halves_is_a_quarter() {
        let t = 100_000;
        let mut sa = LfsrStream::for_unit(3, 0);
        let mut sb = LfsrStream::for_unit(3, 1);
        let half = RateValue::new(0.5).unwrap();
        let a = bernoulli_encode(half, t, &mut sa);
        let b = bernoulli_encode(half, t, &mut sb);
        let r = rate_of(&stochastic_and(&a, &b).unwrap()).get();
        assert!((0.2459..=0.2541).contains(&r), "rate {r}");
    }

    #[test]
    fn and_length_mismatch() {
        let err = stochastic_and(&SpikeTrain::zeros(3), &SpikeTrain::zeros(4)).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { left: 3, right: 4 }));
    }

    #[test]
    fn rate_value_bounds() {
        assert!(RateValue::new(1.2).is_err());
        assert!(RateValue::new(-0.1).is_err());
        assert_eq!(RateValue::saturating(1.2).get(), 1.0);
        assert_eq!(RateValue::saturating(f64::NAN).get(), 0.0);
    }
}
