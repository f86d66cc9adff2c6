use crate::error::{Error, Result};

/// Leaky integrate-and-fire neuron with a shift-register leak.
///
/// Each step: `V <- (V >> leak_shift) + I`; when `V >= threshold` the neuron
/// emits a spike and `V` resets to 0. A shift of 1 is a leak factor of 0.5;
/// arithmetic shifts floor negative potentials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LifNeuron {
    potential: i32,
    threshold: i32,
    leak_shift: u32,
}

impl LifNeuron {
    pub fn new(threshold: i32, leak_shift: u32) -> Result<Self> {
        if threshold < 1 {
            return Err(Error::Config(format!("LIF threshold {threshold} must be >= 1")));
        }
        if leak_shift > 30 {
            return Err(Error::Config(format!("leak shift {leak_shift} too large")));
        }
        Ok(Self { potential: 0, threshold, leak_shift })
    }

    pub fn potential(&self) -> i32 {
        self.potential
    }

    pub fn threshold(&self) -> i32 {
        self.threshold
    }

    pub fn leak_shift(&self) -> u32 {
        self.leak_shift
    }

    pub fn reset(&mut self) {
        self.potential = 0;
    }

    #[inline]
    pub fn step(&mut self, input: i32) -> bool {
        let v = (self.potential >> self.leak_shift)
            .checked_add(input)
            .expect("membrane potential overflow");
        if v >= self.threshold {
            self.potential = 0;
            true
        } else {
            self.potential = v;
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(threshold: i32, inputs: &[i32]) -> Vec<bool> {
        let mut n = LifNeuron::new(threshold, 1).unwrap();
        inputs.iter().map(|&i| n.step(i)).collect()
    }

    #[test]
    fn hand_trace() {
        // V: 2, 1+2=3 fire, 2, 3 fire
        assert_eq!(run(3, &[2, 2, 2, 2]), vec![false, true, false, true]);
    }

    #[test]
    fn unit_threshold_fires_every_step() {
        assert_eq!(run(1, &[1; 6]), vec![true; 6]);
    }

    #[test]
    fn silent_without_input() {
        assert_eq!(run(2, &[0; 6]), vec![false; 6]);
    }

    #[test]
    fn negative_potential_floors() {
        let mut n = LifNeuron::new(5, 1).unwrap();
        n.step(-3);
        assert_eq!(n.potential(), -3);
        n.step(0);
        assert_eq!(n.potential(), -2);
    }

    #[test]
    fn rejects_non_positive_threshold() {
        assert!(LifNeuron::new(0, 1).is_err());
    }

    proptest! {
        #[test]
        fn matches_halving_recurrence(inputs in prop::collection::vec(-20i32..20, 1..64), thr in 1i32..30) {
            let mut n = LifNeuron::new(thr, 1).unwrap();
            let mut v: i64 = 0;
            for &i in &inputs {
                let next = (v as f64 / 2.0).floor() as i64 + i as i64;
                let fired = n.step(i);
                prop_assert_eq!(fired, next >= thr as i64);
                v = if fired { 0 } else { next };
                prop_assert_eq!(n.potential() as i64, v);
            }
        }
    }
}
