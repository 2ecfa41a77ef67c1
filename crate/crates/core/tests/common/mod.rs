//! Shared helpers for the integration tests: random grids and a brute-force
//! enumerator of edit paths.
#![allow(dead_code)]

pub mod decode;
pub mod grad;

use nsed::dp::{log_softmax_in_place, ClassLayout, ClassSelector, EditWeights, OpDistributionGrid};
use nsed::stat::OperationTable;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Del,
    Ins,
    Subs,
}

/// A complete path: the operations with the cell each one leads into.
#[derive(Clone, Debug)]
pub struct Path {
    pub steps: Vec<(Op, usize, usize)>,
    pub log_prob: f64,
}

/// Every monotone path from `(i0, j0)` to `(i1, j1)`.
pub fn enumerate_paths<W: EditWeights>(w: &W, from: (usize, usize), to: (usize, usize)) -> Vec<Path> {
    let mut out = Vec::new();
    let mut steps = Vec::new();
    walk(w, from, to, &mut steps, 0.0, &mut out);
    out
}

fn walk<W: EditWeights>(
    w: &W,
    at: (usize, usize),
    to: (usize, usize),
    steps: &mut Vec<(Op, usize, usize)>,
    lp: f64,
    out: &mut Vec<Path>,
) {
    let (i, j) = at;
    if at == to {
        out.push(Path { steps: steps.clone(), log_prob: lp });
        return;
    }
    if i < to.0 {
        steps.push((Op::Del, i + 1, j));
        walk(w, (i + 1, j), to, steps, lp + w.log_del(i + 1, j), out);
        steps.pop();
    }
    if j < to.1 {
        steps.push((Op::Ins, i, j + 1));
        walk(w, (i, j + 1), to, steps, lp + w.log_ins(i, j + 1), out);
        steps.pop();
    }
    if i < to.0 && j < to.1 {
        steps.push((Op::Subs, i + 1, j + 1));
        walk(w, (i + 1, j + 1), to, steps, lp + w.log_subs(i + 1, j + 1), out);
        steps.pop();
    }
}

/// Expected distribution of a cell from complete paths: the share of path mass
/// through the cell that enters it by each operation.
pub fn brute_expected(g: &OpDistributionGrid, i: usize, j: usize) -> Vec<f64> {
    let (n, m) = (g.source_len(), g.target_len());
    let k = g.num_classes();
    let mut out = vec![0.0; k];
    for p in enumerate_paths(g, (0, 0), (n, m)) {
        for &(op, a, b) in &p.steps {
            if (a, b) != (i, j) {
                continue;
            }
            let class = match op {
                Op::Del => g.del_class(a),
                Op::Ins => g.ins_class(b),
                Op::Subs => g.subs_class(a, b),
            };
            out[class] += p.log_prob.exp();
        }
    }
    let total: f64 = out.iter().sum();
    out.iter().map(|v| v / total).collect()
}

pub fn random_table<R: Rng>(rng: &mut R, s: usize, t: usize) -> OperationTable {
    let raw: Vec<f64> = (0..OperationTable::num_events(s, t)).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    OperationTable::from_probs(s, t, &raw.iter().map(|v| v / total).collect::<Vec<_>>()).unwrap()
}

/// Posterior operation counts by summing over every complete path.
pub fn brute_counts(table: &OperationTable, s: &[usize], t: &[usize]) -> Vec<f64> {
    let w = table.weights(s, t).unwrap();
    let paths = enumerate_paths(&w, (0, 0), (s.len(), t.len()));
    let z = total_prob(&paths);
    let mut counts = vec![0.0; table.log_probs().len()];
    for p in &paths {
        let share = p.log_prob.exp() / z;
        for &(op, i, j) in &p.steps {
            let e = match op {
                Op::Del => table.del_index(s[i - 1]),
                Op::Ins => table.ins_index(t[j - 1]),
                Op::Subs => table.subs_index(s[i - 1], t[j - 1]),
            };
            counts[e] += share;
        }
    }
    counts
}

/// Plain probability-space sum of path probabilities.
pub fn total_prob(paths: &[Path]) -> f64 {
    paths.iter().map(|p| p.log_prob.exp()).sum()
}

/// Random normalised cell distributions with a four-class typeless layout.
pub fn random_typeless_grid<R: Rng>(rng: &mut R, n: usize, m: usize, spread: f64) -> OpDistributionGrid {
    OpDistributionGrid::from_cell_fn(n + 1, m + 1, ClassLayout::matching(), ClassSelector::Typeless, vec![], |_, _| {
        random_log_softmax(rng, 4, spread)
    })
    .unwrap()
}

/// Random grid whose insert/substitute classes depend on the target symbol.
pub fn random_typed_grid<R: Rng>(rng: &mut R, n: usize, m: usize, classes: usize, spread: f64) -> OpDistributionGrid {
    let layout = ClassLayout::target_typed(classes);
    let targets: Vec<usize> = (0..m).map(|_| rng.random_range(0..classes)).collect();
    OpDistributionGrid::from_cell_fn(n + 1, m + 1, layout, ClassSelector::TargetTyped, targets, |_, _| {
        random_log_softmax(rng, layout.total(), spread)
    })
    .unwrap()
}

pub fn random_log_softmax<R: Rng>(rng: &mut R, k: usize, spread: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(-spread..spread)).collect();
    log_softmax_in_place(&mut v);
    v
}

/// A copy of `grid` with one class log-probability shifted by `delta`.
pub fn perturbed(grid: &OpDistributionGrid, index: usize, delta: f64) -> OpDistributionGrid {
    let mut lp = grid.log_probs().to_vec();
    lp[index] += delta;
    OpDistributionGrid::new(
        grid.rows(),
        grid.cols(),
        grid.layout(),
        grid.selector(),
        grid.target_classes().to_vec(),
        lp,
    )
    .unwrap()
}

pub fn assert_rel_close(a: f64, b: f64, rtol: f64, atol: f64, what: &str) {
    let tol = atol + rtol * a.abs().max(b.abs());
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (|diff| {} > {tol})", (a - b).abs());
}

/// Noisy copies over small alphabets: each source symbol is kept, replaced,
/// dropped, or followed by an extra symbol.
pub fn noisy_copy_corpus<R: Rng>(rng: &mut R, pairs: usize, alphabet: usize, max_len: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..pairs)
        .map(|_| {
            let n = rng.random_range(1..=max_len);
            let s: Vec<usize> = (0..n).map(|_| rng.random_range(0..alphabet)).collect();
            let mut t = Vec::new();
            for &a in &s {
                match rng.random_range(0..10) {
                    0 => {}
                    1 => t.push(rng.random_range(0..alphabet)),
                    2 => {
                        t.push(a);
                        t.push(rng.random_range(0..alphabet));
                    }
                    _ => t.push(a),
                }
            }
            (s, t)
        })
        .collect()
}

use nsed::matching::MatchExample;
use nsed::model::Task;
use nsed::nn::EncoderKind;
use nsed::training::{TrainConfig, TransductionItem};
use nsed::transduction::TransductionPair;

/// Ten short strings over ids 2..=5, each paired with itself.
pub fn copy_task() -> (Vec<TransductionPair>, Vec<TransductionItem>) {
    let words: [&[u32]; 10] = [
        &[2, 3, 4],
        &[5, 4, 3, 2],
        &[3, 3, 5],
        &[4, 2],
        &[5, 5, 2, 3, 4],
        &[2, 4, 2, 4],
        &[3],
        &[4, 5, 3],
        &[2, 2, 5, 4, 3],
        &[5, 3, 4, 2],
    ];
    let pairs = words.iter().map(|w| TransductionPair { source: w.to_vec(), target: w.to_vec() }).collect();
    let items = words.iter().map(|w| TransductionItem { source: w.to_vec(), references: vec![w.to_vec()] }).collect();
    (pairs, items)
}

/// Positives are noisy copies, negatives unrelated strings; ids start at 2.
pub fn match_task<R: Rng>(rng: &mut R, count: usize, alphabet: u32) -> Vec<MatchExample> {
    let corpus = noisy_copy_corpus(rng, count, alphabet as usize, 6);
    corpus
        .into_iter()
        .enumerate()
        .map(|(k, (s, t))| {
            let source: Vec<u32> = s.iter().map(|&a| a as u32 + 2).collect();
            if k % 2 == 0 && !t.is_empty() {
                MatchExample { source, target: t.iter().map(|&b| b as u32 + 2).collect(), label: true }
            } else {
                let len = rng.random_range(1..=6);
                let target = (0..len).map(|_| rng.random_range(2..alphabet + 2)).collect();
                MatchExample { source, target, label: false }
            }
        })
        .collect()
}

/// Small, fast settings for tests.
pub fn tiny_config(task: Task, encoder: EncoderKind, d: usize) -> TrainConfig {
    let mut c = TrainConfig::defaults(task);
    c.encoder = encoder;
    c.embed_dim = d;
    c.hidden_dim = d;
    c.layers = 1;
    c.heads = 2;
    c.lr = 1e-2;
    c.batch_size = 10;
    c.validate_every = 25;
    c.max_decays = 100;
    c.micro_batch = 4;
    c
}
