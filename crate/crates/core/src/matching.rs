//! String-pair classification.
//!
//! A pair is scored by the probability that the model generates both strings,
//! `alpha[n, m]`, and classified against a threshold tuned on held-out data.

use crate::dp::{backprop_alpha, backward, em_loss, forward, viterbi, EditScript, PlausibilityMask, ProbTable};
use crate::error::{Error, Result};
use crate::model::{NeuralModel, Task, BOS};
use crate::nn::Gradients;
use crate::training::{bce_from_log_alpha, interpretability_loss, nonmatch_nll, LossWeights, PairLoss};

/// One labelled pair of regular-symbol id sequences (no sentinels).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchExample {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
    pub label: bool,
}

pub(crate) fn with_bos(seq: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    out.push(BOS);
    out.extend_from_slice(seq);
    out
}

fn require_match(model: &NeuralModel) -> Result<()> {
    if model.spec.task != Task::Match {
        return Err(Error::Config("model was not built for matching".into()));
    }
    Ok(())
}

/// Loss of one labelled pair. When `grads` is given, the weighted gradient is
/// accumulated into it.
pub fn pair_loss(
    model: &NeuralModel,
    example: &MatchExample,
    weights: &LossWeights,
    grads: Option<&mut Gradients>,
) -> Result<PairLoss> {
    require_match(model)?;
    let (n, m) = (example.source.len(), example.target.len());
    let fwd = model.forward_pair(&with_bos(&example.source), &with_bos(&example.target))?;
    let grid = &fwd.grid;
    let alpha = forward(grid, n, m)?;
    let cols = m + 1;
    let mut direct = vec![0.0; (n + 1) * cols];
    let mut out = PairLoss::default();

    let (bce, d_bce) = bce_from_log_alpha(alpha.total(), example.label);
    out.bce = bce;
    direct[n * cols + m] += weights.bce * d_bce;

    let mut d_grid = None;
    if example.label {
        if weights.em != 0.0 {
            let beta = backward(grid, n, m)?;
            let em = em_loss(grid, &alpha, &beta, &PlausibilityMask::Standard)?;
            out.em = em.loss;
            out.skipped_cells = em.skipped_cells;
            let mut g = em.grad;
            g.scale(weights.em);
            d_grid = Some(g);
        }
        let (interp, d_interp) = interpretability_loss(&alpha, n, m, weights.interp_length_norm);
        out.interp = interp;
        for (acc, v) in direct.iter_mut().zip(&d_interp) {
            *acc += weights.interp * v;
        }
        out.total = weights.em * out.em + weights.bce * out.bce + weights.interp * out.interp;
    } else {
        let (nm, g) = nonmatch_nll(grid);
        out.nonmatch = nm;
        let mut g = g;
        g.scale(weights.nonmatch);
        d_grid = Some(g);
        out.total = weights.bce * out.bce + weights.nonmatch * out.nonmatch;
    }

    if let Some(grads) = grads {
        let mut total = backprop_alpha(grid, &alpha, &direct)?.to_cell_gradient(grid);
        if let Some(g) = d_grid {
            total.add_scaled(&g, 1.0);
        }
        model.backward_pair(&fwd, &total, None, grads);
    }
    Ok(out)
}

/// `log alpha[n, m]` of a pair.
pub fn score_pair(model: &NeuralModel, source: &[u32], target: &[u32]) -> Result<f64> {
    Ok(alpha_table(model, source, target)?.total())
}

/// The full prefix-probability table of a pair.
pub fn alpha_table(model: &NeuralModel, source: &[u32], target: &[u32]) -> Result<ProbTable> {
    require_match(model)?;
    let fwd = model.forward_pair(&with_bos(source), &with_bos(target))?;
    forward(&fwd.grid, source.len(), target.len())
}

/// True when the pair score reaches the log-space threshold.
pub fn classify(model: &NeuralModel, source: &[u32], target: &[u32], log_threshold: f64) -> Result<(f64, bool)> {
    let score = score_pair(model, source, target)?;
    Ok((score, score >= log_threshold))
}

/// Most probable edit script of a pair.
pub fn align(model: &NeuralModel, source: &[u32], target: &[u32]) -> Result<EditScript> {
    require_match(model)?;
    let fwd = model.forward_pair(&with_bos(source), &with_bos(target))?;
    viterbi(&fwd.grid, source.len(), target.len())
}

/// Threshold maximising F1 on scored, labelled examples. Candidates are the
/// observed scores (predict positive when `score >= threshold`); ties in F1 go to
/// the larger threshold. Returns `(threshold, f1)`.
pub fn tune_threshold(scored: &[(f64, bool)]) -> Result<(f64, f64)> {
    if scored.is_empty() {
        return Err(Error::Empty("no scored examples to tune a threshold on".into()));
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = sorted.iter().filter(|(_, l)| *l).count();
    if positives == 0 || positives == sorted.len() {
        return Err(Error::Data("threshold tuning needs both positive and negative examples".into()));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (sorted[0].0, f64::NEG_INFINITY);
    let mut k = 0;
    while k < sorted.len() {
        let t = sorted[k].0;
        while k < sorted.len() && sorted[k].0 == t {
            if sorted[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let f1 = f1_from_counts(tp, fp, positives - tp);
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best)
}

pub(crate) fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}
