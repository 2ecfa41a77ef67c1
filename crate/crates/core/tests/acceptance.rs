//! Acceptance checks, one test per criterion. Each test writes a single
//! `acceptance <n> PASS|FAIL` line straight to stdout so the summary shows up
//! even when the harness captures output.
//!
//! Criteria 7 to 9 need external corpora and are ignored by default. They read
//! prepared split directories named by environment variables:
//!
//! * `NSED_IE_DIR`: cognate pairs from `nsed prepare cognates --max-pairs 50000`
//! * `NSED_IE_FULL_DIR`, `NSED_AR_EN_DIR`: full cognate and transliteration splits
//! * `NSED_CMU_DIR`: CMUDict splits plus `test.align` (0-based Pharaoh, one line
//!   per `test.tsv` row), as written by `scripts/prepare_cmudict.py`
//!
//! `NSED_MAX_STEPS` caps the step budget of those long runs.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::decode::{exhaustive, source, KINDS};
use common::grad::{matching_check, random_ids, spec, transduction_check, with_bos};
use common::*;
use nsed::checkpoint::{Checkpoint, StatCheckpoint};
use nsed::data::{
    binary_f1, encode_items, encode_match, encode_pairs, load_match_dir, load_transduction_dir, match_vocabulary,
    read_pharaoh, symbol_indices, transduction_vocabularies, IndexBase, LabeledPair, Tokenization, Vocabulary,
};
use nsed::dp::{backward, em_loss, forward, viterbi, EditWeights, OpDistributionGrid, PlausibilityMask};
use nsed::matching::{self, tune_threshold, MatchExample};
use nsed::model::{NeuralModel, Task, EOS, RESERVED};
use nsed::nn::EncoderKind;
use nsed::stat::{e_step, m_step, train_em, OperationTable};
use nsed::training::{
    evaluate_alignment, evaluate_match, evaluate_match_at, evaluate_transduction, train, TaskData, TrainConfig,
    TrainOutcome,
};
use nsed::transduction::{self, beam_search, greedy_decode, DecodeOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(number: u32, title: &str, body: impl FnOnce() + UnwindSafe) {
    let start = Instant::now();
    let result = catch_unwind(body);
    let status = if result.is_ok() { "PASS" } else { "FAIL" };
    let secs = start.elapsed().as_secs_f64();
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {number:>2} {status} {title} ({secs:.1}s)");
    let _ = out.flush();
    if let Err(e) = result {
        resume_unwind(e);
    }
}

/// A random network with a sharpened head, and the operation grid it assigns
/// to a pair (sentinels added).
fn model_grid(task: Task, kind: EncoderKind, seed: u64, s: &[u32], t: &[u32]) -> (NeuralModel, OpDistributionGrid) {
    let mut model = NeuralModel::new(spec(task, kind, 8, 1), seed).unwrap();
    let id = model.params.by_name("head.weight").unwrap();
    model.params.update(id, |_, v| v * 8.0);
    let mut tgt = with_bos(t);
    if task == Task::Transduce {
        tgt.push(EOS);
    }
    let grid = model.forward_pair(&with_bos(s), &tgt).unwrap().grid;
    (model, grid)
}

fn random_pair<R: Rng>(rng: &mut R, task: Task, max_len: usize) -> (Vec<u32>, Vec<u32>) {
    let n = rng.random_range(0..=max_len);
    let m = rng.random_range(0..=max_len);
    let tgt_vocab = if task == Task::Match { 6 } else { 5 };
    (random_ids(rng, n, 6), random_ids(rng, m, tgt_vocab))
}

#[test]
fn criterion_01_oracle_equivalence() {
    criterion(1, "alpha, Viterbi and EM targets match path enumeration (rtol 1e-8)", || {
        let rtol = 1e-8;
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for k in 0..200u64 {
            let task = if k % 2 == 0 { Task::Match } else { Task::Transduce };
            let kind = KINDS[(k / 2) as usize % 3];
            let (s, t) = random_pair(&mut rng, task, 4);
            let (model, g) = model_grid(task, kind, 1000 + k, &s, &t);
            let (n, m) = (g.source_len(), g.target_len());
            let alpha = forward(&g, n, m).unwrap();
            for i in 0..=n {
                for j in 0..=m {
                    let brute = total_prob(&enumerate_paths(&g, (0, 0), (i, j)));
                    assert_rel_close(alpha.get(i, j).exp(), brute, rtol, 0.0, &format!("model {k}: alpha[{i},{j}]"));
                }
            }

            let paths = enumerate_paths(&g, (0, 0), (n, m));
            let best = paths.iter().map(|p| p.log_prob).fold(f64::NEG_INFINITY, f64::max);
            let script = viterbi(&g, n, m).unwrap();
            assert!(script.is_valid(n, m));
            assert_rel_close(script.log_score, best, rtol, 0.0, &format!("model {k}: Viterbi score"));

            let beta = backward(&g, n, m).unwrap();
            let em = em_loss(&g, &alpha, &beta, &PlausibilityMask::Standard).unwrap();
            for i in 0..=n {
                for j in 0..=m {
                    if (i, j) == (0, 0) {
                        continue;
                    }
                    let brute = brute_expected(&g, i, j);
                    for (c, (got, want)) in em.expected.cell(i, j).iter().zip(&brute).enumerate() {
                        assert_rel_close(*got, *want, rtol, 1e-15, &format!("model {k}: expected[{i},{j}][{c}]"));
                    }
                }
            }

            // The public entry points see the same tables.
            match task {
                Task::Match => {
                    let score = matching::score_pair(&model, &s, &t).unwrap();
                    assert_rel_close(score.exp(), total_prob(&paths), rtol, 0.0, "matching score");
                    let a = matching::align(&model, &s, &t).unwrap();
                    assert_rel_close(a.log_score, best, rtol, 0.0, "matching alignment");
                }
                Task::Transduce => {
                    let a = transduction::alpha_table(&model, &s, &t).unwrap();
                    let cut = m - 1;
                    let brute = total_prob(&enumerate_paths(&g, (0, 0), (n, cut)));
                    assert_rel_close(a.total().exp(), brute, rtol, 0.0, "transduction alpha without EOS");
                    let best_cut = enumerate_paths(&g, (0, 0), (n, cut))
                        .iter()
                        .map(|p| p.log_prob)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let v = transduction::align(&model, &s, &t).unwrap();
                    assert_rel_close(v.log_score, best_cut, rtol, 0.0, "transduction alignment");
                }
            }
        }
    });
}

#[test]
fn criterion_02_forward_backward_consistency() {
    criterion(2, "|beta[0,0] - alpha[n,m]| < 1e-6 on 1000 instances up to length 12", || {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let mut worst: f64 = 0.0;
        for k in 0..1000u64 {
            let g = match k % 4 {
                0 => {
                    let (n, m) = (rng.random_range(0..=12), rng.random_range(0..=12));
                    random_typeless_grid(&mut rng, n, m, 4.0)
                }
                1 => {
                    let (n, m) = (rng.random_range(0..=12), rng.random_range(0..=12));
                    random_typed_grid(&mut rng, n, m, 4, 4.0)
                }
                r => {
                    let task = if r == 2 { Task::Match } else { Task::Transduce };
                    let (s, t) = random_pair(&mut rng, task, 12);
                    model_grid(task, KINDS[(k / 4) as usize % 3], 2000 + k, &s, &t).1
                }
            };
            let (n, m) = (g.source_len(), g.target_len());
            let a = forward(&g, n, m).unwrap().total();
            let b = backward(&g, n, m).unwrap().total();
            assert!(a.is_finite() && b.is_finite(), "instance {k}: {a} {b}");
            worst = worst.max((a - b).abs());
            assert!((a - b).abs() < 1e-6, "instance {k}: alpha {a} beta {b}");
        }
        assert!(worst < 1e-6);
    });
}

#[test]
fn criterion_03_gradient_checks() {
    criterion(3, "finite differences agree (rtol 1e-3) for every encoder, head and loss term", || {
        for kind in KINDS {
            matching_check(kind, 8);
            transduction_check(kind, 8);
        }
    });
}

#[test]
fn criterion_04_statistical_em() {
    criterion(4, "EM likelihood is monotone; one step on (a, a) gives (0.6, 0.2, 0.2)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let corpus = noisy_copy_corpus(&mut rng, 1000, 5, 8);
        let (_, trace) = train_em(&corpus, OperationTable::uniform(5, 5), 25, 0.0, 0.0).unwrap();
        assert!(trace.log_likelihoods.len() >= 10);
        for w in trace.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "log-likelihood fell from {} to {}", w[0], w[1]);
        }

        let table = OperationTable::uniform(1, 1);
        let next = m_step(&e_step(&table, &[(vec![0], vec![0])]).unwrap(), 0.0).unwrap().probs();
        let (del, ins, subs) = (next[table.del_index(0)], next[table.ins_index(0)], next[table.subs_index(0, 0)]);
        let want = (0.6, 0.2, 0.2);
        assert!(
            (subs - want.0).abs() < 1e-12 && (del - want.1).abs() < 1e-12 && (ins - want.2).abs() < 1e-12,
            "one EM iteration gave subs={subs} del={del} ins={ins}, expected {want:?}"
        );
    });
}

#[test]
fn criterion_05_decoding() {
    criterion(5, "beam 1 is greedy, wide beams are exhaustive, scores grow with k", || {
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        for (k, kind) in KINDS.iter().cycle().take(60).enumerate() {
            let m = common::decode::model(*kind, 3, 500 + k as u64);
            let s = source(&mut rng);
            let g = greedy_decode(&m, &s, 6).unwrap();
            let b = beam_search(&m, &s, &DecodeOptions { beam: 1, len_norm: 0.0, max_len: 6 }).unwrap();
            assert_eq!(g.symbols, b.symbols);
            assert_eq!(g.log_score.to_bits(), b.log_score.to_bits());
            assert_eq!(g.normalized_score.to_bits(), b.normalized_score.to_bits());
        }

        for symbols in 1..=3 {
            for max_len in 0..=3 {
                for (k, kind) in KINDS.iter().enumerate() {
                    let m = common::decode::model(*kind, symbols, (600 + symbols * 10 + max_len * 3 + k) as u64);
                    let s = source(&mut rng);
                    let width: usize = (0..=max_len).map(|l| symbols.pow(l as u32)).sum();
                    for len_norm in [0.0, 1.0] {
                        let (want, want_score) = exhaustive(&m, &s, symbols, max_len, len_norm);
                        let got = beam_search(&m, &s, &DecodeOptions { beam: width, len_norm, max_len }).unwrap();
                        assert_eq!(got.symbols, want, "symbols={symbols} max_len={max_len} {kind}");
                        assert!((got.normalized_score - want_score).abs() < 1e-9);
                    }
                }
            }
        }

        for seed in 0..30u64 {
            let m = common::decode::model(KINDS[seed as usize % 3], 3, 700 + seed);
            let s = source(&mut rng);
            let mut last = f64::NEG_INFINITY;
            for k in 1..=6 {
                let h = beam_search(&m, &s, &DecodeOptions { beam: k, len_norm: 0.0, max_len: 4 }).unwrap();
                assert!(h.normalized_score >= last - 1e-12, "seed {seed} k {k}: {} < {last}", h.normalized_score);
                last = h.normalized_score;
            }
        }
    });
}

fn run(config: &TrainConfig, data: &TaskData, src_vocab: usize, tgt_vocab: usize) -> (Vec<u8>, TrainOutcome) {
    let model = NeuralModel::new(config.model_spec(src_vocab, tgt_vocab), config.seed).unwrap();
    let mut log = Vec::new();
    let out = train(config, model, data, Some(&mut log)).unwrap();
    (log, out)
}

#[test]
fn criterion_06_overfit_copy_task() {
    criterion(6, "unigram d=16 copies 10 strings with zero WER within 500 steps", || {
        let (pairs, items) = copy_task();
        let data = TaskData::Transduce { train: pairs, valid: items.clone() };
        let mut c = tiny_config(Task::Transduce, EncoderKind::Unigram, 16);
        c.max_steps = 500;
        let (_, out) = run(&c, &data, 6, 6);
        assert!(out.steps <= 500);
        let eval = evaluate_transduction(&out.model, &items, &c).unwrap();
        assert_eq!(eval.wer, 0.0, "WER {} after {} steps", eval.wer, out.steps);
    });
}

fn env_dir(var: &str) -> PathBuf {
    match std::env::var_os(var) {
        Some(v) => PathBuf::from(v),
        None => panic!("{var} is not set; see the header of this file"),
    }
}

fn step_cap() -> usize {
    std::env::var("NSED_MAX_STEPS").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

/// The published training setup at width `d`.
fn full_config(task: Task, encoder: EncoderKind, d: usize, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::defaults(task);
    c.encoder = encoder;
    c.embed_dim = d;
    c.hidden_dim = d;
    c.seed = seed;
    c.max_steps = step_cap();
    c
}

/// Width 64 and a tenfold learning rate, so a single core converges within
/// the time budget.
fn desk_config(task: Task, encoder: EncoderKind, seed: u64) -> TrainConfig {
    let mut c = full_config(task, encoder, 64, seed);
    c.lr = 1e-3;
    c
}

struct MatchData {
    vocab: Vocabulary,
    train: Vec<MatchExample>,
    valid: Vec<MatchExample>,
    test: Vec<MatchExample>,
}

fn load_match(dir: &Path) -> MatchData {
    let splits = load_match_dir(dir, Tokenization::Whitespace).unwrap();
    let test = splits.test.unwrap_or_else(|| panic!("{} has no test split", dir.display()));
    let all: [&[LabeledPair]; 3] = [&splits.train, &splits.valid, &test];
    let vocab = match_vocabulary(&all);
    MatchData {
        train: encode_match(&splits.train, &vocab).unwrap(),
        valid: encode_match(&splits.valid, &vocab).unwrap(),
        test: encode_match(&test, &vocab).unwrap(),
        vocab,
    }
}

fn neural_test_f1(data: &MatchData, c: &TrainConfig) -> f64 {
    let td = TaskData::Match { train: data.train.clone(), valid: data.valid.clone() };
    let (_, out) = run(c, &td, data.vocab.len(), data.vocab.len());
    evaluate_match_at(&out.model, &data.test, out.threshold.unwrap()).unwrap()
}

fn stat_test_f1(data: &MatchData) -> f64 {
    let symbols = data.vocab.len() - RESERVED as usize;
    let positives: Vec<_> = data
        .train
        .iter()
        .filter(|e| e.label)
        .map(|e| (symbol_indices(&e.source), symbol_indices(&e.target)))
        .collect();
    let (table, _) = train_em(&positives, OperationTable::uniform(symbols, symbols), 50, 1e-6, 0.0).unwrap();
    let score = |set: &[MatchExample]| -> Vec<(f64, bool)> {
        set.iter()
            .map(|e| (table.log_likelihood(&symbol_indices(&e.source), &symbol_indices(&e.target)).unwrap(), e.label))
            .collect()
    };
    let (threshold, _) = tune_threshold(&score(&data.valid)).unwrap();
    let scored = score(&data.test);
    let preds: Vec<bool> = scored.iter().map(|&(s, _)| s >= threshold).collect();
    let labels: Vec<bool> = scored.iter().map(|&(_, l)| l).collect();
    binary_f1(&preds, &labels).unwrap()
}

#[test]
#[ignore = "needs NSED_IE_DIR (50k-pair cognate splits); up to two hours"]
fn criterion_07_desk_scale_ordering() {
    criterion(7, "cognate test F1: stat + 25 <= unigram < cnn <= rnn at d=64", || {
        let data = load_match(&env_dir("NSED_IE_DIR"));
        let stat = stat_test_f1(&data);
        let unigram = neural_test_f1(&data, &desk_config(Task::Match, EncoderKind::Unigram, 13));
        let cnn = neural_test_f1(&data, &desk_config(Task::Match, EncoderKind::Cnn, 13));
        let rnn = neural_test_f1(&data, &desk_config(Task::Match, EncoderKind::Rnn, 13));
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "  test F1: stat {stat:.4} unigram {unigram:.4} cnn {cnn:.4} rnn {rnn:.4}");
        assert!(stat < unigram && unigram < cnn && cnn <= rnn, "ordering violated");
        assert!(unigram - stat >= 0.25, "gap {} below 25 points", unigram - stat);
    });
}

#[test]
#[ignore = "needs NSED_AR_EN_DIR and/or NSED_IE_FULL_DIR; full-width training"]
fn criterion_08_full_scale_anchors() {
    criterion(8, "full scale: Arabic-English RNN CER in [21, 28]; cognate RNN F1 >= 93", || {
        let ar = std::env::var_os("NSED_AR_EN_DIR").map(PathBuf::from);
        let ie = std::env::var_os("NSED_IE_FULL_DIR").map(PathBuf::from);
        assert!(ar.is_some() || ie.is_some(), "neither NSED_AR_EN_DIR nor NSED_IE_FULL_DIR is set");
        if let Some(dir) = ar {
            let splits = load_transduction_dir(&dir).unwrap();
            let test = splits.test.unwrap_or_else(|| panic!("{} has no test split", dir.display()));
            let (sv, tv) = transduction_vocabularies(&[&splits.train, &splits.valid, &test]);
            let c = full_config(Task::Transduce, EncoderKind::Rnn, 256, 13);
            let td = TaskData::Transduce {
                train: encode_pairs(&splits.train, &sv, &tv).unwrap(),
                valid: encode_items(&splits.valid, &sv, &tv).unwrap(),
            };
            let (_, out) = run(&c, &td, sv.len(), tv.len());
            let cer = 100.0 * evaluate_transduction(&out.model, &encode_items(&test, &sv, &tv).unwrap(), &c).unwrap().cer;
            let _ = writeln!(std::io::stdout().lock(), "  Arabic-English test CER {cer:.2}");
            assert!((21.0..=28.0).contains(&cer), "CER {cer}");
        }
        if let Some(dir) = ie {
            let f1 = 100.0 * neural_test_f1(&load_match(&dir), &full_config(Task::Match, EncoderKind::Rnn, 256, 13));
            let _ = writeln!(std::io::stdout().lock(), "  cognate test F1 {f1:.2}");
            assert!(f1 >= 93.0, "F1 {f1}");
        }
    });
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
#[ignore = "needs NSED_CMU_DIR (10k-pair CMUDict splits with test.align); up to two hours"]
fn criterion_09_interpretability_effect() {
    criterion(9, "CMUDict alignment F1: interp 0.1 beats interp 0 by >= 1 point (median of 3 seeds)", || {
        let dir = env_dir("NSED_CMU_DIR");
        let splits = load_transduction_dir(&dir).unwrap();
        let test = splits.test.unwrap_or_else(|| panic!("{} has no test split", dir.display()));
        let (sv, tv) = transduction_vocabularies(&[&splits.train, &splits.valid, &test]);
        let test_pairs = encode_pairs(&test, &sv, &tv).unwrap();
        let references = read_pharaoh(&dir.join("test.align"), IndexBase::Zero).unwrap();
        let td = TaskData::Transduce {
            train: encode_pairs(&splits.train, &sv, &tv).unwrap(),
            valid: encode_items(&splits.valid, &sv, &tv).unwrap(),
        };
        let f1_at = |interp: f64| -> f64 {
            median(
                (1..=3u64)
                    .map(|seed| {
                        let mut c = desk_config(Task::Transduce, EncoderKind::Unigram, seed);
                        c.weights.interp = interp;
                        let (_, out) = run(&c, &td, sv.len(), tv.len());
                        let f1 = evaluate_alignment(&out.model, &test_pairs, &references).unwrap().f1();
                        let _ = writeln!(std::io::stdout().lock(), "  interp {interp} seed {seed}: alignment F1 {f1:.4}");
                        f1
                    })
                    .collect(),
            )
        };
        let with = f1_at(0.1);
        let without = f1_at(0.0);
        let _ = writeln!(std::io::stdout().lock(), "  median alignment F1: interp 0.1 {with:.4}, interp 0 {without:.4}");
        assert!(with - without >= 0.01, "difference {} below one point", with - without);
    });
}

#[test]
fn criterion_10_checkpoint_round_trip_and_replay() {
    criterion(10, "reloaded checkpoints reproduce the logged metric; seeded runs replay bit for bit", || {
        let dir = tempfile::tempdir().unwrap();
        let vocab = Vocabulary::from_text("<s>\n</s>\na\nb\nc\nd\n").unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(110);
        let (train_set, valid) = (match_task(&mut rng, 120, 4), match_task(&mut rng, 40, 4));
        let data = TaskData::Match { train: train_set.clone(), valid: valid.clone() };
        let mut c = tiny_config(Task::Match, EncoderKind::Cnn, 8);
        c.max_steps = 60;
        c.validate_every = 10;
        let (log_a, out) = one.install(|| run(&c, &data, 6, 6));
        let (log_b, _) = one.install(|| run(&c, &data, 6, 6));
        assert_eq!(log_a, log_b, "matching metric logs differ");
        let logged: f64 = out.records.iter().map(|r| r.metric).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(logged, out.best_metric);
        let path = dir.path().join("match.nsed");
        Checkpoint {
            config: c.clone(),
            model: out.model.clone(),
            source_vocab: vocab.clone(),
            target_vocab: vocab.clone(),
            source_tokenization: Tokenization::Chars,
            target_tokenization: Tokenization::Chars,
            threshold: out.threshold,
            metric: Some(out.best_metric),
        }
        .save(&path)
        .unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let eval = evaluate_match(&back.model, &valid).unwrap();
        assert_eq!(eval.f1, out.best_metric);
        assert_eq!(Some(eval.threshold), out.threshold);
        assert_eq!(back.metric, Some(out.best_metric));

        let (pairs, items) = copy_task();
        let data = TaskData::Transduce { train: pairs, valid: items.clone() };
        let mut c = tiny_config(Task::Transduce, EncoderKind::Rnn, 8);
        c.max_steps = 60;
        c.validate_every = 10;
        let (log_a, out) = one.install(|| run(&c, &data, 6, 6));
        let (log_b, _) = one.install(|| run(&c, &data, 6, 6));
        assert_eq!(log_a, log_b, "transduction metric logs differ");
        let path = dir.path().join("transduce.nsed");
        Checkpoint {
            config: c.clone(),
            model: out.model.clone(),
            source_vocab: vocab.clone(),
            target_vocab: vocab.clone(),
            source_tokenization: Tokenization::Chars,
            target_tokenization: Tokenization::Chars,
            threshold: None,
            metric: Some(out.best_metric),
        }
        .save(&path)
        .unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(evaluate_transduction(&back.model, &items, &back.config).unwrap().cer, out.best_metric);

        let positives: Vec<_> = train_set
            .iter()
            .filter(|e| e.label)
            .map(|e| (symbol_indices(&e.source), symbol_indices(&e.target)))
            .collect();
        let (table, _) = train_em(&positives, OperationTable::uniform(4, 4), 20, 1e-6, 0.0).unwrap();
        let table = table.rounded_to_f32();
        let score = |t: &OperationTable| -> Vec<(f64, bool)> {
            valid
                .iter()
                .map(|e| (t.log_likelihood(&symbol_indices(&e.source), &symbol_indices(&e.target)).unwrap(), e.label))
                .collect()
        };
        let (threshold, f1) = tune_threshold(&score(&table)).unwrap();
        let path = dir.path().join("stat.nsed");
        StatCheckpoint { table, vocab, tokenization: Tokenization::Chars, smoothing: 0.0, threshold: Some(threshold), metric: Some(f1) }
            .save(&path)
            .unwrap();
        let back = StatCheckpoint::load(&path).unwrap();
        assert_eq!(tune_threshold(&score(&back.table)).unwrap(), (threshold, f1));
        assert_eq!(back.metric, Some(f1));
    });
}
