mod common;

use common::decode::*;
use nsed::dp::forward;
use nsed::model::{BOS, EOS};
use nsed::nn::EncoderKind;
use nsed::transduction::{
    beam_search, beam_search_all, decode, greedy_decode, normalize_score, teacher_forced_log_probs, DecodeOptions,
    DecoderState, TransductionPair, EOS_CLASS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn beam_of_one_is_greedy_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (k, kind) in KINDS.iter().cycle().take(30).enumerate() {
        let m = model(*kind, 3, k as u64);
        let s = source(&mut rng);
        let g = greedy_decode(&m, &s, 6).unwrap();
        let b = beam_search(&m, &s, &DecodeOptions { beam: 1, len_norm: 0.0, max_len: 6 }).unwrap();
        assert_eq!(g.symbols, b.symbols);
        assert_eq!(g.log_score.to_bits(), b.log_score.to_bits());
        assert_eq!(g.truncated, b.truncated);
    }
}

#[test]
fn wide_beam_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut count = 0;
    for symbols in 1..=3 {
        for max_len in 0..=3 {
            for (k, kind) in KINDS.iter().enumerate() {
                let m = model(*kind, symbols, (symbols * 10 + max_len * 3 + k) as u64);
                let s = source(&mut rng);
                let width: usize = (0..=max_len).map(|l| symbols.pow(l as u32)).sum();
                for len_norm in [0.0, 1.0] {
                    let (want, want_score) = exhaustive(&m, &s, symbols, max_len, len_norm);
                    let got = beam_search(&m, &s, &DecodeOptions { beam: width, len_norm, max_len }).unwrap();
                    assert_eq!(got.symbols, want, "symbols={symbols} max_len={max_len} {kind}");
                    assert!((got.normalized_score - want_score).abs() < 1e-9);
                    count += 1;
                }
            }
        }
    }
    assert_eq!(count, 72);
}

#[test]
fn best_beam_score_is_non_decreasing_in_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for seed in 0..20u64 {
        let m = model(KINDS[seed as usize % 3], 3, 100 + seed);
        let s = source(&mut rng);
        let mut last = f64::NEG_INFINITY;
        for k in 1..=6 {
            let h = beam_search(&m, &s, &DecodeOptions { beam: k, len_norm: 0.0, max_len: 4 }).unwrap();
            assert!(h.normalized_score >= last - 1e-12, "seed {seed} k {k}: {} < {last}", h.normalized_score);
            last = h.normalized_score;
        }
    }
}

#[test]
fn some_instance_rewards_a_wider_beam() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let found = (0..60u64).any(|seed| {
        let m = model(KINDS[seed as usize % 3], 2, 200 + seed);
        let s = source(&mut rng);
        let g = greedy_decode(&m, &s, 2).unwrap();
        let b = beam_search(&m, &s, &DecodeOptions { beam: 2, len_norm: 0.0, max_len: 2 }).unwrap();
        b.log_score > g.log_score + 1e-9
    });
    assert!(found, "greedy was optimal on every instance");
}

#[test]
fn incremental_state_matches_the_full_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for (k, kind) in KINDS.iter().cycle().take(12).enumerate() {
        let m = model(*kind, 3, 300 + k as u64);
        let s = source(&mut rng);
        let t: Vec<u32> = (0..rng.random_range(0..4)).map(|_| rng.random_range(2..5)).collect();
        let pair = TransductionPair { source: s.clone(), target: t.clone() };
        let tf = teacher_forced_log_probs(&m, &pair).unwrap();

        let src_ids: Vec<u32> = std::iter::once(BOS).chain(s.iter().copied()).collect();
        let mut tgt_ids: Vec<u32> = std::iter::once(BOS).chain(t.iter().copied()).collect();
        tgt_ids.push(EOS);
        let fwd = m.forward_pair(&src_ids, &tgt_ids).unwrap();
        let alpha = forward(&fwd.grid, s.len(), t.len() + 1).unwrap();

        let enc = m.encode_source(&src_ids).unwrap();
        let mut state = DecoderState::new(&m, &enc).unwrap();
        for j in 0..=t.len() {
            for (i, a) in state.alpha().iter().enumerate() {
                assert!((a - alpha.get(i, j)).abs() < 1e-10, "{kind} alpha[{i},{j}]");
            }
            let lp = state.next_log_probs(&m);
            for (a, b) in lp.iter().zip(&tf[j]) {
                assert!((a - b).abs() < 1e-10, "{kind} step {j}");
            }
            let total: f64 = lp.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-10);
            if j < t.len() {
                state = state.advance(&m, &enc, (t[j] - 1) as usize).unwrap();
            }
        }
    }
}

#[test]
fn length_limit_forces_the_end_symbol() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let m = model(EncoderKind::Unigram, 3, 7);
    let s = source(&mut rng);
    let h = greedy_decode(&m, &s, 0).unwrap();
    assert!(h.symbols.is_empty());
    let tf = teacher_forced_log_probs(&m, &TransductionPair { source: s.clone(), target: vec![] }).unwrap();
    assert_eq!(h.log_score, tf[0][EOS_CLASS]);
    let wanted_eos = tf[0].iter().enumerate().all(|(c, v)| c == EOS_CLASS || *v <= tf[0][EOS_CLASS]);
    assert_eq!(h.truncated, !wanted_eos);
    for max_len in 0..4 {
        let h = decode(&m, &s, &DecodeOptions { beam: 3, len_norm: 0.5, max_len }).unwrap();
        assert!(h.symbols.len() <= max_len);
    }
}

#[test]
fn beam_results_are_sorted_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let m = model(EncoderKind::Rnn, 3, 8);
    let s = source(&mut rng);
    let opts = DecodeOptions { beam: 4, len_norm: 0.7, max_len: 5 };
    let a = beam_search_all(&m, &s, &opts).unwrap();
    let b = beam_search_all(&m, &s, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.windows(2).all(|w| w[0].normalized_score >= w[1].normalized_score));
    for h in &a {
        let expect = normalize_score(h.log_score, h.symbols.len() + 1, 0.7);
        assert_eq!(h.normalized_score, expect);
    }
}

#[test]
fn zero_beam_is_rejected() {
    let m = model(EncoderKind::Unigram, 2, 9);
    assert!(beam_search(&m, &[2, 3], &DecodeOptions { beam: 0, len_norm: 0.0, max_len: 3 }).is_err());
}

#[test]
fn next_symbol_loss_of_a_uniform_model_is_length_times_log_classes() {
    let mut m = model(EncoderKind::Unigram, 3, 10);
    // Zero the head so every per-cell distribution is uniform.
    for name in ["head.weight", "head.bias"] {
        let id = m.params.by_name(name).unwrap();
        m.params.update(id, |_, _| 0.0);
    }
    let pair = TransductionPair { source: vec![2, 3], target: vec![4, 2] };
    let tf = teacher_forced_log_probs(&m, &pair).unwrap();
    let nll: f64 = -(tf[0][3] + tf[1][1]);
    assert!((nll - 2.0 * 4f64.ln()).abs() < 1e-12, "{nll}");
}
