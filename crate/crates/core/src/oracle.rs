//! Exact reference implementations used as ground truth by the test suites.
//!
//! Nothing here calls into the engine code paths it is used to check: matrix
//! products are plain loops, and the SSA expectations are computed in double
//! precision from the closed-form nested normalized products.

use crate::error::{Error, Result};
use crate::matrix::{IntMatrix, RateMatrix, RealMatrix};
use crate::spike::{BitMatrix, LifNeuron, SpikeTensor};

/// Exact integer MVM in crossbar orientation: `y_j = sum_i bits_i * w[i][j]`.
pub fn ideal_mvm_int(w: &IntMatrix, bits: &[bool]) -> Result<Vec<i64>> {
    if bits.len() != w.rows() {
        return Err(Error::Shape(format!(
            "input of length {} for a {}-row matrix",
            bits.len(),
            w.rows()
        )));
    }
    let mut out = vec![0i64; w.cols()];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            for (o, &v) in out.iter_mut().zip(w.row(i)) {
                *o += v as i64;
            }
        }
    }
    Ok(out)
}

/// Monolithic `out x in` integer layer followed by one LIF per output, with
/// potentials reset at each token boundary. `extra` adds a per-frame current
/// (the membrane residual path).
pub fn reference_lif_layer(
    w_out_in: &IntMatrix,
    threshold: i32,
    inputs: &SpikeTensor,
    extra: Option<&SpikeTensor>,
) -> Result<SpikeTensor> {
    if inputs.features() != w_out_in.cols() {
        return Err(Error::Shape(format!(
            "{} input features for a layer with {} inputs",
            inputs.features(),
            w_out_in.cols()
        )));
    }
    let w = w_out_in.transpose();
    let mut out = SpikeTensor::zeros(inputs.tokens(), inputs.steps(), w_out_in.rows());
    for n in 0..inputs.tokens() {
        let mut neurons = vec![LifNeuron::new(threshold, 1)?; w_out_in.rows()];
        for t in 0..inputs.steps() {
            let sums = ideal_mvm_int(&w, inputs.frame(n, t))?;
            for (j, (neuron, s)) in neurons.iter_mut().zip(sums).enumerate() {
                let bonus = extra.map_or(0, |e| e.get(n, t, j) as i64);
                let fired = neuron.step((s + bonus) as i32);
                out.set(n, t, j, fired);
            }
        }
    }
    Ok(out)
}

/// Expected attention output of the stochastic spiking attention given rate
/// matrices `d_K x N`:
/// `S(n, n') = (1/d_K) sum_d Q(d, n) K(d, n')` (zeroed for `n' > n` when
/// causal) and `A(d, n) = (1/N) sum_n' S(n, n') V(d, n')`.
pub fn rate_attention(
    qr: &RateMatrix,
    kr: &RateMatrix,
    vr: &RateMatrix,
    causal: bool,
) -> Result<RateMatrix> {
    let (dk, n) = (qr.rows(), qr.cols());
    for (name, m) in [("K", kr), ("V", vr)] {
        if (m.rows(), m.cols()) != (dk, n) {
            return Err(Error::Shape(format!(
                "{name} is {}x{}, expected {dk}x{n}",
                m.rows(),
                m.cols()
            )));
        }
    }
    let mut s = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if causal && j > i {
                continue;
            }
            let dot: f64 = (0..dk).map(|d| qr.get(d, i) * kr.get(d, j)).sum();
            s.set(i, j, dot / dk as f64);
        }
    }
    Ok(RealMatrix::from_fn(dk, n, |d, i| {
        (0..n).map(|j| s.get(i, j) * vr.get(d, j)).sum::<f64>() / n as f64
    }))
}

/// Conditional expectation of the time-averaged SSA output given the realized
/// binary Q, K, V sequences: the mean over steps of [`rate_attention`] applied
/// to each step's binary matrices.
pub fn conditional_attention_rates(
    q: &[BitMatrix],
    k: &[BitMatrix],
    v: &[BitMatrix],
    causal: bool,
) -> Result<RateMatrix> {
    if q.len() != k.len() || q.len() != v.len() || q.is_empty() {
        return Err(Error::Shape("Q/K/V sequences must be equally long and non-empty".into()));
    }
    let to_rates = |b: &BitMatrix| RealMatrix::from_fn(b.rows(), b.cols(), |r, c| b.get(r, c) as u8 as f64);
    let (dk, n) = (q[0].rows(), q[0].cols());
    let mut acc = RealMatrix::zeros(dk, n);
    for t in 0..q.len() {
        let a = rate_attention(&to_rates(&q[t]), &to_rates(&k[t]), &to_rates(&v[t]), causal)?;
        for d in 0..dk {
            for i in 0..n {
                acc.set(d, i, acc.get(d, i) + a.get(d, i));
            }
        }
    }
    let steps = q.len() as f64;
    Ok(RealMatrix::from_fn(dk, n, |d, i| acc.get(d, i) / steps))
}

/// Scaled dot-product softmax attention on row-per-token matrices.
pub fn softmax_attention(q: &RealMatrix, k: &RealMatrix, v: &RealMatrix, d_k: usize) -> RealMatrix {
    let n = q.rows();
    let scale = 1.0 / (d_k as f64).sqrt();
    let mut out = RealMatrix::zeros(n, v.cols());
    for i in 0..n {
        let logits: Vec<f64> = (0..k.rows())
            .map(|j| (0..q.cols()).map(|c| q.get(i, c) * k.get(j, c)).sum::<f64>() * scale)
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for c in 0..v.cols() {
            let val = exps.iter().enumerate().map(|(j, e)| e / z * v.get(j, c)).sum();
            out.set(i, c, val);
        }
    }
    out
}

/// Exact probability that the comparator rule `input > r`, `r` uniform on
/// `0..i_max`, emits a 1, by enumerating every `r`.
pub fn brute_force_bernoulli(input: u32, i_max: u32) -> f64 {
    (0..i_max).filter(|&r| input > r).count() as f64 / i_max as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::{bernoulli_sample_int, LfsrStream};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mvm_identity_and_zero() {
        let bits = vec![true, false, true, true];
        let y = ideal_mvm_int(&IntMatrix::identity(4), &bits).unwrap();
        assert_eq!(y, vec![1, 0, 1, 1]);
        let y = ideal_mvm_int(&IntMatrix::zeros(4, 3), &bits).unwrap();
        assert_eq!(y, vec![0, 0, 0]);
        assert!(ideal_mvm_int(&IntMatrix::zeros(3, 3), &bits).is_err());
    }

    #[test]
    fn mvm_double_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = IntMatrix::from_fn(128, 128, |_, _| rng.random_range(-15..=15));
        let bits: Vec<bool> = (0..128).map(|_| rng.random()).collect();
        let y = ideal_mvm_int(&w, &bits).unwrap();
        // column-major, reverse row order
        for j in 0..128 {
            let s: i64 = (0..128).rev().filter(|&i| bits[i]).map(|i| w.get(i, j) as i64).sum();
            assert_eq!(y[j], s);
        }
    }

    #[test]
    fn rate_attention_hand_case() {
        let id = RealMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = RealMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let a = rate_attention(&id, &id, &v, false).unwrap();
        let expect = RealMatrix::from_rows(&[vec![0.25, 0.25], vec![0.0, 0.0]]).unwrap();
        assert!(a.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn rate_attention_trivial_cases() {
        let ones = RealMatrix::from_fn(4, 8, |_, _| 1.0);
        let a = rate_attention(&ones, &ones, &ones, false).unwrap();
        assert!(a.as_slice().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let zeros = RealMatrix::zeros(4, 8);
        let a = rate_attention(&ones, &ones, &zeros, true).unwrap();
        assert!(a.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rate_attention_linear_and_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut r = |rows, cols| RealMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>());
        let (q, k, v1, v2) = (r(4, 6), r(4, 6), r(4, 6), r(4, 6));
        let vs = RealMatrix::from_fn(4, 6, |d, n| 0.3 * v1.get(d, n) + 0.7 * v2.get(d, n));
        let a1 = rate_attention(&q, &k, &v1, false).unwrap();
        let a2 = rate_attention(&q, &k, &v2, false).unwrap();
        let a = rate_attention(&q, &k, &vs, false).unwrap();
        let mix = RealMatrix::from_fn(4, 6, |d, n| 0.3 * a1.get(d, n) + 0.7 * a2.get(d, n));
        assert!(a.max_abs_diff(&mix) < 1e-12);

        let perm = [3usize, 0, 5, 1, 4, 2];
        let p = |m: &RealMatrix| RealMatrix::from_fn(4, 6, |d, n| m.get(d, perm[n]));
        let ap = rate_attention(&p(&q), &p(&k), &p(&v1), false).unwrap();
        assert!(ap.max_abs_diff(&p(&a1)) < 1e-12);
    }

    #[test]
    fn softmax_single_token_returns_value() {
        let q = RealMatrix::from_rows(&[vec![0.3, -1.2]]).unwrap();
        let v = RealMatrix::from_rows(&[vec![4.0, 5.0, 6.0]]).unwrap();
        let out = softmax_attention(&q, &q, &v, 2);
        assert!(out.max_abs_diff(&v) < 1e-12);
    }

    #[test]
    fn softmax_identical_keys_is_uniform() {
        let q = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 3.0]]).unwrap();
        let k = RealMatrix::from_rows(&[vec![0.2, 0.2], vec![0.2, 0.2], vec![0.2, 0.2]]).unwrap();
        let v = RealMatrix::from_rows(&[vec![3.0], vec![6.0], vec![9.0]]).unwrap();
        let out = softmax_attention(&q, &k, &v, 2);
        for i in 0..3 {
            assert!((out.get(i, 0) - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_two_tokens_brute_force() {
        let q = RealMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let k = RealMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = RealMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let out = softmax_attention(&q, &k, &v, 2);
        let s = 2f64.sqrt();
        // token 0 logits: 2/s, 0 ; token 1 logits: 0, 1/s
        let p0 = (2.0 / s).exp() / ((2.0 / s).exp() + 1.0);
        let p1 = 1.0 / (1.0 + (1.0 / s).exp());
        assert!((out.get(0, 0) - p0).abs() < 1e-12);
        assert!((out.get(1, 0) - p1).abs() < 1e-12);
    }

    #[test]
    fn brute_force_matches_comparator_rule() {
        assert_eq!(brute_force_bernoulli(1, 4), 0.25);
        assert_eq!(brute_force_bernoulli(8, 8), 1.0);
        let draws = 20_000usize;
        for i_max in [2u32, 4, 8, 16] {
            for input in 0..=i_max {
                let p = brute_force_bernoulli(input, i_max);
                assert_eq!(p, input as f64 / i_max as f64);
                let mut s = LfsrStream::for_unit(77, (i_max * 100 + input) as u64);
                let ones = (0..draws)
                    .filter(|_| bernoulli_sample_int(input, i_max, &mut s).unwrap())
                    .count();
                let rate = ones as f64 / draws as f64;
                let sigma = (p * (1.0 - p) / draws as f64).sqrt();
                assert!((rate - p).abs() <= 4.0 * sigma + 1e-12, "I={input} i_max={i_max} rate={rate}");
            }
        }
    }
}
