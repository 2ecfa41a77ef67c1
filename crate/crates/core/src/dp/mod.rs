//! Log-space dynamic programming over edit operations.
//!
//! Tables are indexed by prefix lengths: cell `(i, j)` covers the first `i` source
//! symbols and the first `j` target symbols, so a table for strings of length `n`
//! and `m` has `(n + 1) x (m + 1)` cells. Operation probabilities are looked up by
//! the cell the operation leads *into*.

mod algorithms;
mod em;
mod grid;
mod table;

pub use algorithms::{
    backprop_alpha, backward, forward, grad_alpha_wrt_prob, grad_log_alpha, op_posteriors, viterbi, EditOp,
    EditScript, OpTriples,
};
pub use em::{em_loss, EmLoss};
pub use grid::{CellGradient, ClassLayout, ClassSelector, OpDistributionGrid, PlausibilityMask};
pub use table::{Orientation, ProbTable};

/// Log-probabilities of the three edit operations leading into each cell.
pub trait EditWeights {
    fn source_len(&self) -> usize;
    fn target_len(&self) -> usize;
    /// Deleting source symbol `i`, moving from `(i - 1, j)` to `(i, j)`.
    fn log_del(&self, i: usize, j: usize) -> f64;
    /// Inserting target symbol `j`, moving from `(i, j - 1)` to `(i, j)`.
    fn log_ins(&self, i: usize, j: usize) -> f64;
    /// Substituting source symbol `i` by target symbol `j`.
    fn log_subs(&self, i: usize, j: usize) -> f64;
}

#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// In-place log-softmax. Returns the log normaliser.
pub fn log_softmax_in_place(values: &mut [f64]) -> f64 {
    let lse = log_sum_exp(values);
    for v in values.iter_mut() {
        *v -= lse;
    }
    lse
}

/// The top-left `(n + 1) x (m + 1)` corner of larger edit weights.
pub struct Truncated<'a, W: ?Sized> {
    inner: &'a W,
    n: usize,
    m: usize,
}

impl<'a, W: EditWeights + ?Sized> Truncated<'a, W> {
    pub fn new(inner: &'a W, n: usize, m: usize) -> Self {
        assert!(n <= inner.source_len() && m <= inner.target_len(), "truncation larger than the weights");
        Self { inner, n, m }
    }
}

impl<W: EditWeights + ?Sized> EditWeights for Truncated<'_, W> {
    fn source_len(&self) -> usize {
        self.n
    }

    fn target_len(&self) -> usize {
        self.m
    }

    fn log_del(&self, i: usize, j: usize) -> f64 {
        self.inner.log_del(i, j)
    }

    fn log_ins(&self, i: usize, j: usize) -> f64 {
        self.inner.log_ins(i, j)
    }

    fn log_subs(&self, i: usize, j: usize) -> f64 {
        self.inner.log_subs(i, j)
    }
}
