use super::{LfsrStream, RateValue, SpikeTrain};
use crate::error::{Error, Result};

/// 8-bit input quantization: `round(x * 256)`, clamped to `[0, 256]`.
#[inline]
pub fn quantize_rate(x: RateValue) -> u32 {
    (x.get() * 256.0).round().clamp(0.0, 256.0) as u32
}

/// Bernoulli rate coding through the byte comparator: bit `t` is 1 iff
/// `q > r_t` where `r_t` is the t-th byte of `stream`.
pub fn bernoulli_encode(x: RateValue, steps: usize, stream: &mut LfsrStream) -> SpikeTrain {
    let q = quantize_rate(x);
    (0..steps).map(|_| q > stream.next_byte() as u32).collect()
}

/// Sample a bit with probability exactly `input / i_max` by comparing the
/// unnormalized integer against a uniform draw from `0..i_max`.
#[inline]
pub fn bernoulli_sample_int(input: u32, i_max: u32, stream: &mut LfsrStream) -> Result<bool> {
    if input > i_max {
        return Err(Error::CounterOverflow { input, i_max });
    }
    Ok(input > stream.draw_below(i_max))
}

/// Comparator-based Bernoulli neuron with a power-of-two normalizer. Owns its
/// stream, one per hardware encoder.
#[derive(Clone, Debug)]
pub struct BernoulliEncoder {
    i_max: u32,
    stream: LfsrStream,
}

impl BernoulliEncoder {
    pub fn new(i_max: u32, stream: LfsrStream) -> Result<Self> {
        if !i_max.is_power_of_two() || !(2..=256).contains(&i_max) {
            return Err(Error::Config(format!(
                "encoder normalizer {i_max} must be a power of two in [2, 256]"
            )));
        }
        Ok(Self { i_max, stream })
    }

    pub fn i_max(&self) -> u32 {
        self.i_max
    }

    pub fn stream(&self) -> &LfsrStream {
        &self.stream
    }

    pub fn sample(&mut self, input: u32) -> Result<bool> {
        bernoulli_sample_int(input, self.i_max, &mut self.stream)
    }
}
