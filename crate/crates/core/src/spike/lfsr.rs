//! 32-bit Fibonacci LFSR used as the pseudo-random byte source for every
//! Bernoulli encoder in the accelerator.
//!
//! The register is shifted right; the feedback bit is the parity of the tapped
//! bits and enters at the MSB. One "draw" advances the register by a full 32
//! steps so that all four bytes of the register are fresh, and the four bytes of
//! the pre-advance register are handed out (MSB first).

use crate::error::{Error, Result};

/// Tap mask for the primitive polynomial x^32 + x^22 + x^2 + x + 1.
///
/// With right shifts, tap `k` (1-indexed from the MSB side) reads bit `32 - k`.
pub const TAPS_32_22_2_1: u32 = (1 << 0) | (1 << 10) | (1 << 30) | (1 << 31);

/// Advance a Fibonacci register by one step.
#[inline]
pub fn lfsr_step(register: u32, tap_mask: u32) -> u32 {
    let feedback = (register & tap_mask).count_ones() & 1;
    (register >> 1) | (feedback << 31)
}

/// SplitMix64 finalizer, used to derive per-unit seeds.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a global seed and a hardware unit id into a 64-bit value.
#[inline]
pub fn mix_seed(global_seed: u64, unit_id: u64) -> u64 {
    splitmix64(global_seed ^ splitmix64(unit_id ^ 0xA5A5_5A5A_C3C3_3C3C))
}

/// A per-unit pseudo-random byte stream.
///
/// Single owner, mutable. Streams may move between threads but are never
/// shared; every hardware consumer owns one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LfsrStream {
    register: u32,
    tap_mask: u32,
    unit_id: u64,
    draws: u64,
    buffer: [u8; 4],
    buffered: u8,
}

impl LfsrStream {
    pub fn new(register: u32, tap_mask: u32, unit_id: u64) -> Result<Self> {
        if register == 0 {
            return Err(Error::ZeroRegister);
        }
        Ok(Self {
            register,
            tap_mask,
            unit_id,
            draws: 0,
            buffer: [0; 4],
            buffered: 0,
        })
    }

    /// Stream for hardware unit `unit_id` under `global_seed`, using the
    /// default maximal-length taps.
    pub fn for_unit(global_seed: u64, unit_id: u64) -> Self {
        let mixed = mix_seed(global_seed, unit_id);
        let mut register = (mixed ^ (mixed >> 32)) as u32;
        if register == 0 {
            register = 0x8000_0001;
        }
        Self::new(register, TAPS_32_22_2_1, unit_id).expect("nonzero register")
    }

    pub fn register(&self) -> u32 {
        self.register
    }

    pub fn tap_mask(&self) -> u32 {
        self.tap_mask
    }

    pub fn unit_id(&self) -> u64 {
        self.unit_id
    }

    /// Number of bytes consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Return the four bytes of the current register (MSB first) and advance
    /// the register by 32 steps. Any partially consumed word is discarded.
    pub fn next_bytes(&mut self) -> [u8; 4] {
        let out = self.register.to_be_bytes();
        for _ in 0..32 {
            self.register = lfsr_step(self.register, self.tap_mask);
        }
        self.buffered = 0;
        self.draws += 4;
        out
    }

    /// Next single byte; all four bytes of each register word are used.
    #[inline]
    pub fn next_byte(&mut self) -> u8 {
        if self.buffered == 0 {
            let word = self.register.to_be_bytes();
            for _ in 0..32 {
                self.register = lfsr_step(self.register, self.tap_mask);
            }
            self.buffer = word;
            self.buffered = 4;
        }
        let byte = self.buffer[4 - self.buffered as usize];
        self.buffered -= 1;
        self.draws += 1;
        byte
    }

    /// Uniform integer in `0..i_max` taken from the low bits of the next byte.
    /// `i_max` must be a power of two no larger than 256.
    #[inline]
    pub fn draw_below(&mut self, i_max: u32) -> u32 {
        debug_assert!(i_max.is_power_of_two() && i_max <= 256);
        self.next_byte() as u32 & (i_max - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// GF(2) 32x32 matrix stored as columns.
    #[derive(Clone, Copy, PartialEq, Eq)]
    struct Gf2([u32; 32]);

    impl Gf2 {
        fn identity() -> Self {
            let mut cols = [0u32; 32];
            for (i, c) in cols.iter_mut().enumerate() {
                *c = 1 << i;
            }
            Gf2(cols)
        }

        fn apply(&self, v: u32) -> u32 {
            let mut out = 0;
            for i in 0..32 {
                if v >> i & 1 == 1 {
                    out ^= self.0[i];
                }
            }
            out
        }

        fn mul(&self, rhs: &Gf2) -> Gf2 {
            let mut cols = [0u32; 32];
            for (i, c) in cols.iter_mut().enumerate() {
                *c = self.apply(rhs.0[i]);
            }
            Gf2(cols)
        }

        fn pow(&self, mut e: u64) -> Gf2 {
            let mut base = *self;
            let mut acc = Gf2::identity();
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc.mul(&base);
                }
                base = base.mul(&base);
                e >>= 1;
            }
            acc
        }
    }

    #[test]
    fn taps_give_maximal_period() {
        // The step map is linear, so its matrix is recovered from basis vectors.
        let mut cols = [0u32; 32];
        for (i, c) in cols.iter_mut().enumerate() {
            *c = lfsr_step(1 << i, TAPS_32_22_2_1);
        }
        let step = Gf2(cols);
        let period: u64 = (1 << 32) - 1;
        assert!(step.pow(period) == Gf2::identity());
        for q in [3u64, 5, 17, 257, 65537] {
            assert!(step.pow(period / q) != Gf2::identity(), "order divides period/{q}");
        }
    }

    #[test]
    fn first_bytes_are_initial_register() {
        let mut s = LfsrStream::new(1, TAPS_32_22_2_1, 0).unwrap();
        assert_eq!(s.next_bytes(), [0, 0, 0, 1]);
        assert_eq!(s.draws(), 4);
        assert_ne!(s.register(), 0);
    }

    #[test]
    fn zero_register_rejected() {
        assert!(matches!(
            LfsrStream::new(0, TAPS_32_22_2_1, 3),
            Err(Error::ZeroRegister)
        ));
    }

    #[test]
    fn byte_draws_follow_word_order() {
        let mut a = LfsrStream::for_unit(11, 4);
        let mut b = a.clone();
        let word = a.next_bytes();
        let bytes: Vec<u8> = (0..4).map(|_| b.next_byte()).collect();
        assert_eq!(bytes, word);
        assert_eq!(a.register(), b.register());
    }

    #[test]
    fn neighbouring_units_diverge_quickly() {
        let mut a = LfsrStream::for_unit(7, 0);
        let mut b = LfsrStream::for_unit(7, 1);
        let da: Vec<u8> = (0..4).map(|_| a.next_byte()).collect();
        let db: Vec<u8> = (0..4).map(|_| b.next_byte()).collect();
        assert_ne!(da, db);
    }

    #[test]
    fn byte_histogram_is_flat() {
        // 10^7 bytes: each bin expects 39062.5 with sd ~197, so +/-3% is ~6 sd.
        let mut s = LfsrStream::for_unit(2024, 17);
        let mut hist = [0u64; 256];
        let n = 10_000_000u64;
        for _ in 0..n {
            hist[s.next_byte() as usize] += 1;
        }
        let expect = n as f64 / 256.0;
        for (v, &c) in hist.iter().enumerate() {
            let ratio = c as f64 / expect;
            assert!((0.97..=1.03).contains(&ratio), "byte {v}: ratio {ratio}");
        }
        let chi2: f64 = hist
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 255 dof: mean 255, sd ~22.6; 99.9% quantile is about 330.
        assert!(chi2 < 330.0, "chi2 {chi2}");
    }

    #[test]
    fn determinism_per_unit() {
        let mut a = LfsrStream::for_unit(99, 12345);
        let mut b = LfsrStream::for_unit(99, 12345);
        for _ in 0..1000 {
            assert_eq!(a.next_byte(), b.next_byte());
        }
    }
}
