use crate::error::{Error, Result};

/// Dense binary matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![false; rows * cols] }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![true; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} bits for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Spike activity of a layer: `tokens x steps x features`, indexed
/// `[token][step][feature]` to match the token-wise AIMC dataflow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTensor {
    tokens: usize,
    steps: usize,
    features: usize,
    data: Vec<bool>,
}

impl SpikeTensor {
    pub fn zeros(tokens: usize, steps: usize, features: usize) -> Self {
        Self { tokens, steps, features, data: vec![false; tokens * steps * features] }
    }

    pub fn from_fn(
        tokens: usize,
        steps: usize,
        features: usize,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Self {
        let mut data = Vec::with_capacity(tokens * steps * features);
        for n in 0..tokens {
            for t in 0..steps {
                for j in 0..features {
                    data.push(f(n, t, j));
                }
            }
        }
        Self { tokens, steps, features, data }
    }

    /// Assemble from per-token blocks of `steps * features` bits.
    pub fn from_token_blocks(steps: usize, features: usize, blocks: Vec<Vec<bool>>) -> Result<Self> {
        let tokens = blocks.len();
        let mut data = Vec::with_capacity(tokens * steps * features);
        for b in blocks {
            if b.len() != steps * features {
                return Err(Error::Shape(format!(
                    "token block of {} bits, expected {}",
                    b.len(),
                    steps * features
                )));
            }
            data.extend(b);
        }
        Ok(Self { tokens, steps, features, data })
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn features(&self) -> usize {
        self.features
    }

    #[inline]
    pub fn get(&self, n: usize, t: usize, j: usize) -> bool {
        self.data[(n * self.steps + t) * self.features + j]
    }

    #[inline]
    pub fn set(&mut self, n: usize, t: usize, j: usize, v: bool) {
        self.data[(n * self.steps + t) * self.features + j] = v;
    }

    /// Feature vector of token `n` at step `t`.
    #[inline]
    pub fn frame(&self, n: usize, t: usize) -> &[bool] {
        let start = (n * self.steps + t) * self.features;
        &self.data[start..start + self.features]
    }

    /// All steps of token `n`, `steps * features` bits.
    pub fn token(&self, n: usize) -> &[bool] {
        let len = self.steps * self.features;
        &self.data[n * len..(n + 1) * len]
    }

    /// Time-averaged rate per `(token, feature)`, row-major `tokens x features`.
    pub fn rates(&self) -> Vec<Vec<f64>> {
        (0..self.tokens)
            .map(|n| {
                let mut acc = vec![0u32; self.features];
                for t in 0..self.steps {
                    for (a, &b) in acc.iter_mut().zip(self.frame(n, t)) {
                        *a += b as u32;
                    }
                }
                acc.into_iter().map(|c| c as f64 / self.steps.max(1) as f64).collect()
            })
            .collect()
    }

    pub fn mean_rate(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().filter(|&&b| b).count() as f64 / self.data.len() as f64
    }

    /// Features `[start, start + width)` of every frame.
    pub fn slice_features(&self, start: usize, width: usize) -> Self {
        Self::from_fn(self.tokens, self.steps, width, |n, t, j| self.get(n, t, start + j))
    }

    /// Elementwise OR of two equally shaped tensors.
    pub fn or(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect();
        Ok(Self { tokens: self.tokens, steps: self.steps, features: self.features, data })
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.tokens, self.steps, self.features) != (other.tokens, other.steps, other.features) {
            return Err(Error::Shape(format!(
                "spike tensors {}x{}x{} and {}x{}x{}",
                self.tokens, self.steps, self.features, other.tokens, other.steps, other.features
            )));
        }
        Ok(())
    }
}
