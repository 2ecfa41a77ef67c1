use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let subs = prev[j] + usize::from(x != y);
            cur[j + 1] = subs.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `(reference index, distance, reference length)` of the reference with the
/// lowest character error rate; the first one wins ties.
pub fn best_reference<T: PartialEq>(hyp: &[T], refs: &[Vec<T>]) -> Result<(usize, usize, usize)> {
    if refs.is_empty() {
        return Err(Error::Empty("no reference strings".into()));
    }
    let mut best: Option<(usize, usize, usize)> = None;
    for (k, r) in refs.iter().enumerate() {
        if r.is_empty() {
            return Err(Error::Empty("empty reference string".into()));
        }
        let d = levenshtein(hyp, r);
        let better = match best {
            None => true,
            Some((_, bd, bl)) => (d as f64 / r.len() as f64) < (bd as f64 / bl as f64),
        };
        if better {
            best = Some((k, d, r.len()));
        }
    }
    Ok(best.expect("at least one reference"))
}

/// Edit distance divided by the reference length, minimised over references.
pub fn cer<T: PartialEq>(hyp: &[T], refs: &[Vec<T>]) -> Result<f64> {
    let (_, d, len) = best_reference(hyp, refs)?;
    Ok(d as f64 / len as f64)
}

/// Total edit distance over total reference length, using each item's
/// lowest-error reference.
pub fn corpus_cer<T: PartialEq>(hyps: &[Vec<T>], refs: &[Vec<Vec<T>>]) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::Dimension(format!("{} hypotheses for {} reference groups", hyps.len(), refs.len())));
    }
    if hyps.is_empty() {
        return Err(Error::Empty("no items to score".into()));
    }
    let (mut dist, mut len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        let (_, d, l) = best_reference(h, r)?;
        dist += d;
        len += l;
    }
    Ok(dist as f64 / len as f64)
}

/// Fraction of items that match none of their references exactly.
pub fn wer<T: PartialEq>(hyps: &[Vec<T>], refs: &[Vec<Vec<T>>]) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::Dimension(format!("{} hypotheses for {} reference groups", hyps.len(), refs.len())));
    }
    if hyps.is_empty() {
        return Err(Error::Empty("no items to score".into()));
    }
    let mut wrong = 0;
    for (h, r) in hyps.iter().zip(refs) {
        if cer(h, r)? > 0.0 {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / hyps.len() as f64)
}

/// Aligned `(source, target)` positions, 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlignmentLinkSet(pub BTreeSet<(usize, usize)>);

impl AlignmentLinkSet {
    pub fn new(links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self(links.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn within_bounds(&self, n: usize, m: usize) -> bool {
        self.0.iter().all(|&(i, j)| i >= 1 && i <= n && j >= 1 && j <= m)
    }
}

/// Link counts for micro-averaged precision and recall.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkCounts {
    pub predicted: usize,
    pub reference: usize,
    pub correct: usize,
}

impl LinkCounts {
    pub fn of(pred: &AlignmentLinkSet, reference: &AlignmentLinkSet) -> Self {
        Self {
            predicted: pred.len(),
            reference: reference.len(),
            correct: pred.0.intersection(&reference.0).count(),
        }
    }

    pub fn add(&mut self, other: LinkCounts) {
        self.predicted += other.predicted;
        self.reference += other.reference;
        self.correct += other.correct;
    }

    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            self.correct as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.reference == 0 {
            0.0
        } else {
            self.correct as f64 / self.reference as f64
        }
    }

    pub fn f1(&self) -> f64 {
        if self.predicted == 0 && self.reference == 0 {
            return 1.0;
        }
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

pub fn alignment_f1(pred: &AlignmentLinkSet, reference: &AlignmentLinkSet) -> f64 {
    LinkCounts::of(pred, reference).f1()
}

/// Binary F1 of the positive class; 0 when nothing is predicted positive.
pub fn binary_f1(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok(crate::matching::f1_from_counts(tp, fp, fn_))
}
