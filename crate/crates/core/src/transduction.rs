//! String transduction: generating a target string from a source string.
//!
//! Targets are scored with an end-of-sequence symbol appended. The next target
//! symbol is predicted by mixing, over source rows, the insertion and
//! substitution distributions of the candidate cells, weighted by the prefix
//! probability of the cell each operation starts from.

use std::cmp::Ordering;

use crate::dp::{
    backprop_alpha, backward, em_loss, forward, log_add, log_softmax_in_place, log_sum_exp, viterbi, EditScript,
    PlausibilityMask, ProbTable, Truncated,
};
use crate::error::{Error, Result};
use crate::matching::with_bos;
use crate::model::{NeuralModel, SourceEncoding, Task, BOS, EOS};
use crate::nn::{Gradients, Mat};
use crate::training::{interpretability_loss, LossWeights, PairLoss};

/// Target class of the end-of-sequence symbol.
pub const EOS_CLASS: usize = (EOS - 1) as usize;

/// Source and target id sequences without sentinels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransductionPair {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

fn require_transduce(model: &NeuralModel) -> Result<()> {
    if model.spec.task != Task::Transduce {
        return Err(Error::Config("model was not built for transduction".into()));
    }
    Ok(())
}

fn target_ids(target: &[u32]) -> Vec<u32> {
    let mut ids = with_bos(target);
    ids.push(EOS);
    ids
}

/// Next-symbol distribution for one target position.
struct Mixture {
    classes: usize,
    /// Per source row: log-softmax over insertion then substitution classes.
    log_l: Vec<Vec<f64>>,
    /// Per source row: log-weight of the insertion and substitution blocks.
    ins_w: Vec<f64>,
    subs_w: Vec<f64>,
    numerators: Vec<f64>,
    log_z: f64,
}

impl Mixture {
    /// `alpha_col[i]` is the prefix log-probability of cell `(i, j)`; `head_row(i)`
    /// gives the head outputs of context `(i, j)`.
    fn new<'a>(alpha_col: &[f64], head_row: impl Fn(usize) -> &'a [f64], classes: usize) -> Self {
        let rows = alpha_col.len();
        let mut log_l = Vec::with_capacity(rows);
        let mut ins_w = Vec::with_capacity(rows);
        let mut subs_w = Vec::with_capacity(rows);
        let mut numerators = vec![f64::NEG_INFINITY; classes];
        let mut log_z = f64::NEG_INFINITY;
        for i in 0..rows {
            let mut l = head_row(i)[1..1 + 2 * classes].to_vec();
            log_softmax_in_place(&mut l);
            let wi = alpha_col[i];
            let ws = if i > 0 { alpha_col[i - 1] } else { f64::NEG_INFINITY };
            for y in 0..classes {
                numerators[y] = log_add(numerators[y], log_add(wi + l[y], ws + l[classes + y]));
            }
            log_z = log_add(log_z, wi + log_sum_exp(&l[..classes]));
            if ws != f64::NEG_INFINITY {
                log_z = log_add(log_z, ws + log_sum_exp(&l[classes..]));
            }
            log_l.push(l);
            ins_w.push(wi);
            subs_w.push(ws);
        }
        Self { classes, log_l, ins_w, subs_w, numerators, log_z }
    }

    fn log_probs(&self) -> Vec<f64> {
        self.numerators.iter().map(|n| n - self.log_z).collect()
    }

    /// Gradient of `-log P(y)` with respect to the alpha column and to head-output
    /// rows (insertion/substitution slots only).
    fn backward(&self, y: usize, d_alpha: &mut [f64], mut d_head_row: impl FnMut(usize, &[f64])) {
        let t = self.classes;
        let num = self.numerators[y];
        let mut d_l = vec![0.0; 2 * t];
        let mut d_logits = vec![0.0; 2 * t + 1];
        for (i, l) in self.log_l.iter().enumerate() {
            let mut sum_ins = 0.0;
            let mut sum_subs = 0.0;
            for k in 0..2 * t {
                let w = if k < t { self.ins_w[i] } else { self.subs_w[i] };
                if w == f64::NEG_INFINITY {
                    d_l[k] = 0.0;
                    continue;
                }
                let term = w + l[k];
                let mut c = (term - self.log_z).exp();
                if k % t == y {
                    c -= (term - num).exp();
                }
                d_l[k] = c;
                if k < t {
                    sum_ins += c;
                } else {
                    sum_subs += c;
                }
            }
            d_alpha[i] += sum_ins;
            if i > 0 {
                d_alpha[i - 1] += sum_subs;
            }
            let total: f64 = d_l.iter().sum();
            d_logits[0] = 0.0;
            for k in 0..2 * t {
                d_logits[1 + k] = d_l[k] - l[k].exp() * total;
            }
            d_head_row(i, &d_logits);
        }
    }
}

/// Loss of one training pair. When `grads` is given, the weighted gradient is
/// accumulated into it.
pub fn pair_loss(
    model: &NeuralModel,
    pair: &TransductionPair,
    weights: &LossWeights,
    grads: Option<&mut Gradients>,
) -> Result<PairLoss> {
    require_transduce(model)?;
    let tgt = target_ids(&pair.target);
    let fwd = model.forward_pair(&with_bos(&pair.source), &tgt)?;
    let grid = &fwd.grid;
    let (n, m_full) = (pair.source.len(), tgt.len() - 1);
    let cols = m_full + 1;
    let classes = model.spec.target_classes();
    let alpha = forward(grid, n, m_full)?;
    let mut out = PairLoss::default();
    let mut direct = vec![0.0; (n + 1) * cols];
    let mut d_head = Mat::zeros(fwd.head_out.rows(), fwd.head_out.cols());
    let mut d_grid = None;

    if weights.em != 0.0 {
        let beta = backward(grid, n, m_full)?;
        let em = em_loss(grid, &alpha, &beta, &PlausibilityMask::Standard)?;
        out.em = em.loss;
        out.skipped_cells = em.skipped_cells;
        let mut g = em.grad;
        g.scale(weights.em);
        d_grid = Some(g);
    }

    let mut alpha_col = vec![0.0; n + 1];
    let mut d_alpha_col = vec![0.0; n + 1];
    for j in 0..m_full {
        for (i, a) in alpha_col.iter_mut().enumerate() {
            *a = alpha.get(i, j);
        }
        let mix = Mixture::new(&alpha_col, |i| fwd.head_out.row(i * cols + j), classes);
        let y = (tgt[j + 1] - 1) as usize;
        out.nll -= mix.numerators[y] - mix.log_z;
        if weights.nll != 0.0 {
            d_alpha_col.iter_mut().for_each(|v| *v = 0.0);
            mix.backward(y, &mut d_alpha_col, |i, d| {
                for (acc, v) in d_head.row_mut(i * cols + j).iter_mut().zip(d) {
                    *acc += weights.nll * v;
                }
            });
            for (i, v) in d_alpha_col.iter().enumerate() {
                direct[i * cols + j] += weights.nll * v;
            }
        }
    }

    let (interp, d_interp) = interpretability_loss(&alpha, n, m_full - 1, weights.interp_length_norm);
    let compensation = -alpha.total();
    out.interp = interp + compensation;
    for (acc, v) in direct.iter_mut().zip(&d_interp) {
        *acc += weights.interp * v;
    }
    direct[n * cols + m_full] -= weights.interp;
    out.total = weights.em * out.em + weights.nll * out.nll + weights.interp * out.interp;

    if let Some(grads) = grads {
        let mut total = backprop_alpha(grid, &alpha, &direct)?.to_cell_gradient(grid);
        if let Some(g) = d_grid {
            total.add_scaled(&g, 1.0);
        }
        model.backward_pair(&fwd, &total, Some(&d_head), grads);
    }
    Ok(out)
}

/// Teacher-forced next-symbol log-distributions for every target position
/// (including the final end-of-sequence prediction).
pub fn teacher_forced_log_probs(model: &NeuralModel, pair: &TransductionPair) -> Result<Vec<Vec<f64>>> {
    require_transduce(model)?;
    let tgt = target_ids(&pair.target);
    let fwd = model.forward_pair(&with_bos(&pair.source), &tgt)?;
    let (n, m_full) = (pair.source.len(), tgt.len() - 1);
    let cols = m_full + 1;
    let alpha = forward(&fwd.grid, n, m_full)?;
    let classes = model.spec.target_classes();
    let mut out = Vec::with_capacity(m_full);
    for j in 0..m_full {
        let col: Vec<f64> = (0..=n).map(|i| alpha.get(i, j)).collect();
        out.push(Mixture::new(&col, |i| fwd.head_out.row(i * cols + j), classes).log_probs());
    }
    Ok(out)
}

/// Prefix-probability table over the source and the target without the
/// end-of-sequence column.
pub fn alpha_table(model: &NeuralModel, source: &[u32], target: &[u32]) -> Result<ProbTable> {
    require_transduce(model)?;
    let tgt = target_ids(target);
    let fwd = model.forward_pair(&with_bos(source), &tgt)?;
    forward(&Truncated::new(&fwd.grid, source.len(), target.len()), source.len(), target.len())
}

/// Most probable edit script between a source and a target, ignoring the
/// end-of-sequence column.
pub fn align(model: &NeuralModel, source: &[u32], target: &[u32]) -> Result<EditScript> {
    require_transduce(model)?;
    let tgt = target_ids(target);
    let fwd = model.forward_pair(&with_bos(source), &tgt)?;
    viterbi(&Truncated::new(&fwd.grid, source.len(), target.len()), source.len(), target.len())
}

/// Incremental decoding state after a target prefix.
#[derive(Clone, Debug)]
pub struct DecoderState {
    prefix: Vec<u32>,
    alpha: Vec<f64>,
    head_col: Mat,
}

impl DecoderState {
    pub fn new(model: &NeuralModel, src: &SourceEncoding) -> Result<Self> {
        require_transduce(model)?;
        let ht = model.encode_target_last(&[BOS])?;
        let head_col = model.column_head_outputs(src, &ht);
        let rows = src.rows();
        let mut alpha = vec![f64::NEG_INFINITY; rows];
        alpha[0] = 0.0;
        for i in 1..rows {
            let cell = model.transduction_cell(head_col.row(i), None);
            alpha[i] = alpha[i - 1] + cell[0];
        }
        Ok(Self { prefix: Vec::new(), alpha, head_col })
    }

    /// Target ids generated so far.
    pub fn prefix(&self) -> &[u32] {
        &self.prefix
    }

    /// Prefix log-probabilities of the current column, one per source row.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn next_log_probs(&self, model: &NeuralModel) -> Vec<f64> {
        Mixture::new(&self.alpha, |i| self.head_col.row(i), model.spec.target_classes()).log_probs()
    }

    /// State after appending the symbol with the given target class.
    pub fn advance(&self, model: &NeuralModel, src: &SourceEncoding, class: usize) -> Result<Self> {
        let classes = model.spec.target_classes();
        if class >= classes {
            return Err(Error::Vocabulary(format!("target class {class} outside {classes} classes")));
        }
        let mut prefix = self.prefix.clone();
        prefix.push(class as u32 + 1);
        let ht = model.encode_target_last(&with_bos(&prefix))?;
        let head_col = model.column_head_outputs(src, &ht);
        let rows = self.alpha.len();
        let mut alpha = vec![f64::NEG_INFINITY; rows];
        for i in 0..rows {
            let cell = model.transduction_cell(head_col.row(i), Some(self.head_col.row(i)));
            let mut acc = self.alpha[i] + cell[1 + class];
            if i > 0 {
                acc = log_add(acc, alpha[i - 1] + cell[0]);
                acc = log_add(acc, self.alpha[i - 1] + cell[1 + classes + class]);
            }
            alpha[i] = acc;
        }
        Ok(Self { prefix, alpha, head_col })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    /// Target ids without the end-of-sequence symbol.
    pub symbols: Vec<u32>,
    /// Sum of next-symbol log-probabilities including the end-of-sequence step.
    pub log_score: f64,
    /// `log_score / (len + 1)^len_norm`.
    pub normalized_score: f64,
    /// The length limit forced the end-of-sequence symbol.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeOptions {
    pub beam: usize,
    pub len_norm: f64,
    /// Maximum number of symbols before the end-of-sequence symbol.
    pub max_len: usize,
}

impl DecodeOptions {
    pub fn greedy(max_len: usize) -> Self {
        Self { beam: 1, len_norm: 0.0, max_len }
    }
}

/// Default output length limit for a source of length `n`.
pub fn default_max_len(n: usize) -> usize {
    2 * n + 10
}

pub fn normalize_score(log_score: f64, emitted: usize, len_norm: f64) -> f64 {
    if len_norm == 0.0 {
        log_score
    } else {
        log_score / (emitted as f64).powf(len_norm)
    }
}

/// Index of the largest entry; the lowest index wins ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

pub fn greedy_decode(model: &NeuralModel, source: &[u32], max_len: usize) -> Result<Hypothesis> {
    let src = model.encode_source(&with_bos(source))?;
    let mut state = DecoderState::new(model, &src)?;
    let mut log_score = 0.0;
    loop {
        let lp = state.next_log_probs(model);
        let forced = state.prefix.len() >= max_len;
        let y = if forced { EOS_CLASS } else { argmax(&lp) };
        log_score += lp[y];
        if y == EOS_CLASS {
            let emitted = state.prefix.len() + 1;
            return Ok(Hypothesis {
                symbols: state.prefix,
                log_score,
                normalized_score: normalize_score(log_score, emitted, 0.0),
                truncated: forced && argmax(&lp) != EOS_CLASS,
            });
        }
        state = state.advance(model, &src, y)?;
    }
}

struct BeamEntry {
    state: DecoderState,
    log_score: f64,
    finished: bool,
    truncated: bool,
}

/// Beam search with length normalisation. Returns the final beam, best first.
pub fn beam_search_all(model: &NeuralModel, source: &[u32], opts: &DecodeOptions) -> Result<Vec<Hypothesis>> {
    if opts.beam == 0 {
        return Err(Error::Config("beam size must be at least 1".into()));
    }
    let src = model.encode_source(&with_bos(source))?;
    let emitted = |e: &BeamEntry| e.state.prefix.len() + usize::from(e.finished);
    let mut beam = vec![BeamEntry {
        state: DecoderState::new(model, &src)?,
        log_score: 0.0,
        finished: false,
        truncated: false,
    }];
    while beam.iter().any(|e| !e.finished) {
        // (normalised score, parent, class or None for a carried finished entry, raw score, forced)
        let mut candidates: Vec<(f64, usize, Option<usize>, f64, bool)> = Vec::new();
        for (p, entry) in beam.iter().enumerate() {
            if entry.finished {
                let norm = normalize_score(entry.log_score, emitted(entry), opts.len_norm);
                candidates.push((norm, p, None, entry.log_score, entry.truncated));
                continue;
            }
            let lp = entry.state.next_log_probs(model);
            let len = entry.state.prefix.len();
            if len >= opts.max_len {
                let score = entry.log_score + lp[EOS_CLASS];
                let forced = argmax(&lp) != EOS_CLASS;
                candidates.push((normalize_score(score, len + 1, opts.len_norm), p, Some(EOS_CLASS), score, forced));
                continue;
            }
            for (y, l) in lp.iter().enumerate() {
                let score = entry.log_score + l;
                candidates.push((normalize_score(score, len + 1, opts.len_norm), p, Some(y), score, false));
            }
        }
        candidates.sort_by(|a, b| match b.0.total_cmp(&a.0) {
            Ordering::Equal => (a.1, a.2.map_or(0, |y| y + 1)).cmp(&(b.1, b.2.map_or(0, |y| y + 1))),
            other => other,
        });
        candidates.truncate(opts.beam);
        let mut next = Vec::with_capacity(candidates.len());
        for (_, p, y, score, forced) in candidates {
            let parent = &beam[p];
            match y {
                None => next.push(BeamEntry {
                    state: parent.state.clone(),
                    log_score: parent.log_score,
                    finished: true,
                    truncated: parent.truncated,
                }),
                Some(EOS_CLASS) => next.push(BeamEntry {
                    state: parent.state.clone(),
                    log_score: score,
                    finished: true,
                    truncated: forced,
                }),
                Some(y) => next.push(BeamEntry {
                    state: parent.state.advance(model, &src, y)?,
                    log_score: score,
                    finished: false,
                    truncated: false,
                }),
            }
        }
        beam = next;
    }
    let mut hyps: Vec<Hypothesis> = beam
        .into_iter()
        .map(|e| {
            let len = e.state.prefix.len() + 1;
            Hypothesis {
                normalized_score: normalize_score(e.log_score, len, opts.len_norm),
                symbols: e.state.prefix,
                log_score: e.log_score,
                truncated: e.truncated,
            }
        })
        .collect();
    hyps.sort_by(|a, b| b.normalized_score.total_cmp(&a.normalized_score));
    Ok(hyps)
}

pub fn beam_search(model: &NeuralModel, source: &[u32], opts: &DecodeOptions) -> Result<Hypothesis> {
    let mut all = beam_search_all(model, source, opts)?;
    Ok(all.remove(0))
}

/// Decodes with the given options, using the greedy path for a beam of one.
pub fn decode(model: &NeuralModel, source: &[u32], opts: &DecodeOptions) -> Result<Hypothesis> {
    if opts.beam == 1 && opts.len_norm == 0.0 {
        greedy_decode(model, source, opts.max_len)
    } else {
        beam_search(model, source, opts)
    }
}
