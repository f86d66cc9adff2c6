//! Stochastic spiking attention.
//!
//! Two evaluators share one stream contract: [`ssa_attend`] computes each
//! step directly, [`ssa_attend_streaming`] steps the N x N cell array cycle by
//! cycle. Every score cell and every output encoder owns one LFSR stream and
//! draws exactly one byte per time step, so both forms produce the same bits.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RateMatrix;
use crate::spike::{bernoulli_sample_int, domain, unit_base, BitMatrix, LfsrStream};

/// Largest head dimension the 8-bit encoders can normalize by.
pub const MAX_HEAD_DIM: usize = 256;
/// Largest token count of one attention tile.
pub const MAX_TOKENS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsaConfig {
    pub tokens: usize,
    pub head_dim: usize,
    pub causal: bool,
    pub steps: usize,
}

impl SsaConfig {
    pub fn new(tokens: usize, head_dim: usize, causal: bool, steps: usize) -> Result<Self> {
        let cfg = Self { tokens, head_dim, causal, steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let pow2 = |x: usize| x >= 2 && x.is_power_of_two();
        if !pow2(self.tokens) || self.tokens > MAX_TOKENS {
            return Err(Error::Config(format!(
                "token count {} must be a power of two in 2..={MAX_TOKENS}",
                self.tokens
            )));
        }
        if !pow2(self.head_dim) || self.head_dim > MAX_HEAD_DIM {
            return Err(Error::Config(format!(
                "head dimension {} must be a power of two in 2..={MAX_HEAD_DIM}",
                self.head_dim
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("at least one time step is required".into()));
        }
        Ok(())
    }
}

/// Per-step binary Q, K, V of one head, each `head_dim x tokens`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadActivations {
    pub q: Vec<BitMatrix>,
    pub k: Vec<BitMatrix>,
    pub v: Vec<BitMatrix>,
}

impl HeadActivations {
    pub fn new(q: Vec<BitMatrix>, k: Vec<BitMatrix>, v: Vec<BitMatrix>) -> Result<Self> {
        let h = Self { q, k, v };
        let Some(first) = h.q.first() else {
            return Err(Error::Shape("empty activation sequence".into()));
        };
        let shape = (first.rows(), first.cols());
        if h.k.len() != h.q.len() || h.v.len() != h.q.len() {
            return Err(Error::Shape(format!(
                "sequence lengths differ: Q {}, K {}, V {}",
                h.q.len(),
                h.k.len(),
                h.v.len()
            )));
        }
        for m in h.q.iter().chain(&h.k).chain(&h.v) {
            if (m.rows(), m.cols()) != shape {
                return Err(Error::Shape(format!(
                    "matrix {}x{} differs from {}x{}",
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        Ok(h)
    }

    pub fn steps(&self) -> usize {
        self.q.len()
    }

    pub fn head_dim(&self) -> usize {
        self.q[0].rows()
    }

    pub fn tokens(&self) -> usize {
        self.q[0].cols()
    }

    fn check(&self, cfg: &SsaConfig) -> Result<()> {
        cfg.validate()?;
        if (self.head_dim(), self.tokens(), self.steps()) != (cfg.head_dim, cfg.tokens, cfg.steps) {
            return Err(Error::Shape(format!(
                "activations are {}x{} over {} steps, config expects {}x{} over {}",
                self.head_dim(),
                self.tokens(),
                self.steps(),
                cfg.head_dim,
                cfg.tokens,
                cfg.steps
            )));
        }
        Ok(())
    }
}

/// Per-step binary attention output, each `head_dim x tokens`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionOutput {
    pub a: Vec<BitMatrix>,
}

impl AttentionOutput {
    /// Time-averaged output rates, `head_dim x tokens`.
    pub fn rates(&self) -> RateMatrix {
        let (rows, cols) = (self.a[0].rows(), self.a[0].cols());
        let steps = self.a.len() as f64;
        RateMatrix::from_fn(rows, cols, |r, c| {
            self.a.iter().filter(|m| m.get(r, c)).count() as f64 / steps
        })
    }
}

/// Stream partition of one head tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SsaStreams {
    pub global_seed: u64,
    pub base: u64,
}

impl SsaStreams {
    pub fn new(global_seed: u64, layer: usize, head: usize) -> Self {
        Self { global_seed, base: unit_base(domain::ATTENTION, layer as u64, head as u64) }
    }

    /// Score cell (query token `i`, key token `j`).
    pub fn cell(&self, cfg: &SsaConfig, i: usize, j: usize) -> LfsrStream {
        LfsrStream::for_unit(self.global_seed, self.base + (i * cfg.tokens + j) as u64)
    }

    /// Output encoder for token `n`, feature `d`.
    pub fn encoder(&self, cfg: &SsaConfig, n: usize, d: usize) -> LfsrStream {
        let offset = cfg.tokens * cfg.tokens + n * cfg.head_dim + d;
        LfsrStream::for_unit(self.global_seed, self.base + offset as u64)
    }
}

/// Functional evaluator. Rows (query tokens) are independent under the stream
/// contract and run in parallel.
pub fn ssa_attend(head: &HeadActivations, cfg: &SsaConfig, streams: &SsaStreams) -> Result<AttentionOutput> {
    head.check(cfg)?;
    let (n_tok, dk, steps) = (cfg.tokens, cfg.head_dim, cfg.steps);

    // rows[i][t][d] = A^t(d, i)
    let rows: Vec<Vec<Vec<bool>>> = (0..n_tok)
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<bool>>> {
            let mut cells: Vec<LfsrStream> = (0..n_tok).map(|j| streams.cell(cfg, i, j)).collect();
            let mut encoders: Vec<LfsrStream> = (0..dk).map(|d| streams.encoder(cfg, i, d)).collect();
            let mut out = Vec::with_capacity(steps);
            let mut score = vec![false; n_tok];
            for t in 0..steps {
                let (q, k, v) = (&head.q[t], &head.k[t], &head.v[t]);
                for (j, cell) in cells.iter_mut().enumerate() {
                    let count = (0..dk).filter(|&d| q.get(d, i) && k.get(d, j)).count() as u32;
                    let bit = bernoulli_sample_int(count, dk as u32, cell)?;
                    score[j] = bit && !(cfg.causal && j > i);
                }
                let mut a = Vec::with_capacity(dk);
                for (d, enc) in encoders.iter_mut().enumerate() {
                    let sum = (0..n_tok).filter(|&j| score[j] && v.get(d, j)).count() as u32;
                    a.push(bernoulli_sample_int(sum, n_tok as u32, enc)?);
                }
                out.push(a);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let a = (0..steps)
        .map(|t| BitMatrix::from_fn(dk, n_tok, |d, i| rows[i][t][d]))
        .collect();
    Ok(AttentionOutput { a })
}

/// State of one stochastic attention cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SacState {
    /// Dot-product counter. Nine bits are needed when the head dimension is
    /// 256 (all-ones operands).
    pub counter: u16,
    /// Score bit held during the output phase.
    pub score_bit: bool,
    pub v_fifo: VecDeque<bool>,
}

impl SacState {
    fn new(head_dim: usize) -> Self {
        Self { counter: 0, score_bit: false, v_fifo: VecDeque::with_capacity(head_dim) }
    }

    pub fn reset(&mut self) {
        self.counter = 0;
        self.score_bit = false;
        self.v_fifo.clear();
    }
}

/// Cycle-level simulation of the attention tile.
///
/// Step `t` streams `Q^t` along rows and `K^t`, `V^t` along columns during
/// cycles `[t*d_K, (t+1)*d_K)`. At the end of that window each cell samples its
/// score bit from its counter. During the next window the cell pops `V^t` from
/// its FIFO (while `V^{t+1}` is pushed), ANDs it with the held score, and the
/// row adder feeds the output encoder of feature `d` at cycle offset `d`. The
/// run therefore takes `(T + 1) * d_K` cycles.
pub fn ssa_attend_streaming(
    head: &HeadActivations,
    cfg: &SsaConfig,
    streams: &SsaStreams,
) -> Result<(AttentionOutput, u64)> {
    head.check(cfg)?;
    let (n_tok, dk, steps) = (cfg.tokens, cfg.head_dim, cfg.steps);

    let mut sacs: Vec<SacState> = (0..n_tok * n_tok).map(|_| SacState::new(dk)).collect();
    let mut cell_streams: Vec<LfsrStream> = (0..n_tok * n_tok)
        .map(|idx| streams.cell(cfg, idx / n_tok, idx % n_tok))
        .collect();
    let mut enc_streams: Vec<LfsrStream> = (0..n_tok * dk)
        .map(|idx| streams.encoder(cfg, idx / dk, idx % dk))
        .collect();
    let mut out: Vec<BitMatrix> = (0..steps).map(|_| BitMatrix::zeros(dk, n_tok)).collect();

    let total = (steps + 1) * dk;
    for cycle in 0..total {
        let window = cycle / dk;
        let offset = cycle % dk;

        // Output phase of step window-1: combinational path uses the held
        // score bits and the FIFO heads before anything is latched.
        if window >= 1 {
            let t = window - 1;
            for i in 0..n_tok {
                let mut sum = 0u32;
                for j in 0..n_tok {
                    let sac = &mut sacs[i * n_tok + j];
                    let v_bit = sac.v_fifo.pop_front().ok_or_else(|| {
                        Error::Shape("value FIFO underflow".into())
                    })?;
                    sum += (sac.score_bit && v_bit) as u32;
                }
                let bit = bernoulli_sample_int(sum, n_tok as u32, &mut enc_streams[i * dk + offset])?;
                out[t].set(offset, i, bit);
            }
        }

        // Score phase of step `window`.
        if window < steps {
            let (q, k, v) = (&head.q[window], &head.k[window], &head.v[window]);
            for i in 0..n_tok {
                let q_bit = q.get(offset, i);
                for j in 0..n_tok {
                    let sac = &mut sacs[i * n_tok + j];
                    sac.counter += (q_bit && k.get(offset, j)) as u16;
                    sac.v_fifo.push_back(v.get(offset, j));
                }
            }
            if offset == dk - 1 {
                for i in 0..n_tok {
                    for j in 0..n_tok {
                        let idx = i * n_tok + j;
                        let sac = &mut sacs[idx];
                        debug_assert!(sac.counter as usize <= dk);
                        let bit = bernoulli_sample_int(sac.counter as u32, dk as u32, &mut cell_streams[idx])?;
                        sac.score_bit = bit && !(cfg.causal && j > i);
                        sac.counter = 0;
                    }
                }
            }
        }
    }
    Ok((AttentionOutput { a: out }, total as u64))
}
