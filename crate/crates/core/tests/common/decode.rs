//! Random transduction models and an exhaustive decoding oracle.

use nsed::model::{ModelSpec, NeuralModel, Task};
use nsed::nn::EncoderKind;
use nsed::transduction::{normalize_score, teacher_forced_log_probs, TransductionPair, EOS_CLASS};
use rand::Rng;

/// A random transduction model over `symbols` regular target symbols.
pub fn model(kind: EncoderKind, symbols: usize, seed: u64) -> NeuralModel {
    let spec = ModelSpec {
        task: Task::Transduce,
        encoder: kind,
        embed_dim: 8,
        hidden_dim: 8,
        layers: 1,
        heads: 2,
        kernel_width: 3,
        max_positions: 32,
        source_vocab: 6,
        target_vocab: 2 + symbols,
    };
    let mut m = NeuralModel::new(spec, seed).unwrap();
    // Sharpen the output head so decisions are not all near-uniform.
    let id = m.params.by_name("head.weight").unwrap();
    m.params.update(id, |_, v| v * 8.0);
    m
}

pub fn source<R: Rng>(rng: &mut R) -> Vec<u32> {
    let n = rng.random_range(1..=4);
    (0..n).map(|_| rng.random_range(2..6)).collect()
}

pub const KINDS: [EncoderKind; 3] = [EncoderKind::Unigram, EncoderKind::Cnn, EncoderKind::Rnn];

/// Best output by scoring every sequence of length at most `max_len` with
/// teacher forcing on the full grid.
pub fn exhaustive(m: &NeuralModel, s: &[u32], symbols: usize, max_len: usize, len_norm: f64) -> (Vec<u32>, f64) {
    let mut best: (Vec<u32>, f64) = (vec![], f64::NEG_INFINITY);
    let mut frontier: Vec<Vec<u32>> = vec![vec![]];
    for len in 0..=max_len {
        for y in &frontier {
            let tf = teacher_forced_log_probs(m, &TransductionPair { source: s.to_vec(), target: y.clone() }).unwrap();
            let mut score = 0.0;
            for (j, &sym) in y.iter().enumerate() {
                score += tf[j][(sym - 1) as usize];
            }
            score += tf[len][EOS_CLASS];
            let norm = normalize_score(score, len + 1, len_norm);
            if norm > best.1 {
                best = (y.clone(), norm);
            }
        }
        frontier = frontier
            .iter()
            .flat_map(|y| {
                (0..symbols as u32).map(move |c| {
                    let mut z = y.clone();
                    z.push(c + 2);
                    z
                })
            })
            .collect();
    }
    best
}

