//! Context-free stochastic edit distance trained with expectation maximisation.
//!
//! One multinomial covers every operation: deleting each source symbol, inserting
//! each target symbol, and substituting each source/target pair. Symbols are
//! dense 0-based ids within their alphabets.

use rayon::prelude::*;

use crate::dp::{backward, forward, op_posteriors, EditWeights};
use crate::error::{Error, Result};

const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct OperationTable {
    source_size: usize,
    target_size: usize,
    log_probs: Vec<f64>,
}

impl OperationTable {
    pub fn num_events(source_size: usize, target_size: usize) -> usize {
        source_size + target_size + source_size * target_size
    }

    pub fn uniform(source_size: usize, target_size: usize) -> Self {
        let k = Self::num_events(source_size, target_size);
        Self { source_size, target_size, log_probs: vec![-(k as f64).ln(); k] }
    }

    /// Builds a table from probabilities laid out as deletions, insertions, then
    /// substitutions in row-major source-by-target order.
    pub fn from_probs(source_size: usize, target_size: usize, probs: &[f64]) -> Result<Self> {
        let k = Self::num_events(source_size, target_size);
        if probs.len() != k {
            return Err(Error::Dimension(format!("expected {k} probabilities, got {}", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Numerical("operation probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!("operation probabilities sum to {total}")));
        }
        Ok(Self { source_size, target_size, log_probs: probs.iter().map(|p| p.ln()).collect() })
    }

    /// Builds a table from log-probabilities in the same layout as [`Self::from_probs`].
    pub fn from_log_probs(source_size: usize, target_size: usize, log_probs: Vec<f64>) -> Result<Self> {
        let k = Self::num_events(source_size, target_size);
        if log_probs.len() != k {
            return Err(Error::Dimension(format!("expected {k} log-probabilities, got {}", log_probs.len())));
        }
        if log_probs.iter().any(|v| v.is_nan() || *v > 0.0) {
            return Err(Error::Numerical("log-probabilities must be non-positive numbers".into()));
        }
        let total: f64 = log_probs.iter().map(|v| v.exp()).sum();
        if (total - 1.0).abs() > 1e-4 {
            return Err(Error::Numerical(format!("operation probabilities sum to {total}")));
        }
        Ok(Self { source_size, target_size, log_probs })
    }

    /// The same table with every log-probability rounded to `f32`, as stored on disk.
    pub fn rounded_to_f32(&self) -> Self {
        Self { log_probs: self.log_probs.iter().map(|&v| v as f32 as f64).collect(), ..self.clone() }
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|v| v.exp()).collect()
    }

    #[inline]
    pub fn del_index(&self, a: usize) -> usize {
        a
    }

    #[inline]
    pub fn ins_index(&self, b: usize) -> usize {
        self.source_size + b
    }

    #[inline]
    pub fn subs_index(&self, a: usize, b: usize) -> usize {
        self.source_size + self.target_size + a * self.target_size + b
    }

    pub fn weights<'a>(&'a self, source: &'a [usize], target: &'a [usize]) -> Result<TableWeights<'a>> {
        if let Some(&a) = source.iter().find(|&&a| a >= self.source_size) {
            return Err(Error::Vocabulary(format!("source symbol id {a} outside an alphabet of {}", self.source_size)));
        }
        if let Some(&b) = target.iter().find(|&&b| b >= self.target_size) {
            return Err(Error::Vocabulary(format!("target symbol id {b} outside an alphabet of {}", self.target_size)));
        }
        Ok(TableWeights { table: self, source, target })
    }

    /// `log P(s, t)` summed over all edit sequences.
    pub fn log_likelihood(&self, source: &[usize], target: &[usize]) -> Result<f64> {
        let w = self.weights(source, target)?;
        Ok(forward(&w, source.len(), target.len())?.total())
    }
}

/// The table viewed as edit weights for one string pair.
pub struct TableWeights<'a> {
    table: &'a OperationTable,
    source: &'a [usize],
    target: &'a [usize],
}

impl EditWeights for TableWeights<'_> {
    fn source_len(&self) -> usize {
        self.source.len()
    }

    fn target_len(&self) -> usize {
        self.target.len()
    }

    fn log_del(&self, i: usize, _j: usize) -> f64 {
        self.table.log_probs[self.table.del_index(self.source[i - 1])]
    }

    fn log_ins(&self, _i: usize, j: usize) -> f64 {
        self.table.log_probs[self.table.ins_index(self.target[j - 1])]
    }

    fn log_subs(&self, i: usize, j: usize) -> f64 {
        self.table.log_probs[self.table.subs_index(self.source[i - 1], self.target[j - 1])]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedCounts {
    pub source_size: usize,
    pub target_size: usize,
    pub counts: Vec<f64>,
    /// Corpus log-likelihood under the table the counts were collected with.
    pub log_likelihood: f64,
    /// Pairs with zero probability under the table; they contribute nothing.
    pub skipped_pairs: usize,
}

impl ExpectedCounts {
    fn zeros(source_size: usize, target_size: usize) -> Self {
        Self {
            source_size,
            target_size,
            counts: vec![0.0; OperationTable::num_events(source_size, target_size)],
            log_likelihood: 0.0,
            skipped_pairs: 0,
        }
    }

    fn merge(mut self, other: &ExpectedCounts) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.log_likelihood += other.log_likelihood;
        self.skipped_pairs += other.skipped_pairs;
        self
    }
}

fn accumulate(table: &OperationTable, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<ExpectedCounts> {
    let mut acc = ExpectedCounts::zeros(table.source_size, table.target_size);
    for (s, t) in pairs {
        let w = table.weights(s, t)?;
        let (n, m) = (s.len(), t.len());
        let alpha = forward(&w, n, m)?;
        let total = alpha.total();
        if total == f64::NEG_INFINITY {
            acc.skipped_pairs += 1;
            continue;
        }
        let beta = backward(&w, n, m)?;
        let post = op_posteriors(&w, &alpha, &beta)?;
        for i in 0..=n {
            for j in 0..=m {
                let c = post.idx(i, j);
                if i > 0 {
                    acc.counts[table.del_index(s[i - 1])] += post.del[c];
                }
                if j > 0 {
                    acc.counts[table.ins_index(t[j - 1])] += post.ins[c];
                }
                if i > 0 && j > 0 {
                    acc.counts[table.subs_index(s[i - 1], t[j - 1])] += post.subs[c];
                }
            }
        }
        acc.log_likelihood += total;
    }
    Ok(acc)
}

/// Expected operation counts over a corpus. Deterministic for any thread count.
pub fn e_step(table: &OperationTable, corpus: &[(Vec<usize>, Vec<usize>)]) -> Result<ExpectedCounts> {
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus has no pairs".into()));
    }
    let parts: Vec<Result<ExpectedCounts>> = corpus.par_chunks(CHUNK).map(|c| accumulate(table, c)).collect();
    let mut total = ExpectedCounts::zeros(table.source_size, table.target_size);
    for part in parts {
        total = total.merge(&part?);
    }
    Ok(total)
}

/// Normalises counts into a new table, adding `smoothing` to every event first.
pub fn m_step(counts: &ExpectedCounts, smoothing: f64) -> Result<OperationTable> {
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::Config(format!("smoothing must be a finite non-negative number, got {smoothing}")));
    }
    let total: f64 = counts.counts.iter().map(|c| c + smoothing).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical("expected counts sum to zero".into()));
    }
    let log_total = total.ln();
    let log_probs = counts.counts.iter().map(|c| (c + smoothing).ln() - log_total).collect();
    Ok(OperationTable { source_size: counts.source_size, target_size: counts.target_size, log_probs })
}

#[derive(Clone, Debug, Default)]
pub struct EmTrace {
    /// Corpus log-likelihood before each update.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

/// Runs EM until the log-likelihood improves by less than `tolerance` or the
/// iteration budget is spent.
pub fn train_em(
    corpus: &[(Vec<usize>, Vec<usize>)],
    init: OperationTable,
    max_iterations: usize,
    tolerance: f64,
    smoothing: f64,
) -> Result<(OperationTable, EmTrace)> {
    let mut table = init;
    let mut trace = EmTrace::default();
    for _ in 0..max_iterations {
        let counts = e_step(&table, corpus)?;
        let ll = counts.log_likelihood;
        if let Some(&prev) = trace.log_likelihoods.last() {
            if (ll - prev).abs() < tolerance {
                trace.log_likelihoods.push(ll);
                trace.converged = true;
                return Ok((table, trace));
            }
        }
        trace.log_likelihoods.push(ll);
        table = m_step(&counts, smoothing)?;
    }
    Ok((table, trace))
}
