mod common;

use common::*;
use nsed::checkpoint::Checkpoint;
use nsed::data::{Tokenization, Vocabulary};
use nsed::matching::{self, tune_threshold, MatchExample};
use nsed::model::{NeuralModel, Task};
use nsed::nn::EncoderKind;
use nsed::training::{
    bce_from_log_alpha, evaluate_match, evaluate_match_at, evaluate_transduction, train, PlateauSchedule, TaskData,
    TrainConfig, CONFIG_KEYS, METRICS_HEADER,
};
use nsed::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn schedule_decays_after_two_stale_validations() {
    let mut s = PlateauSchedule::new(1e-4, 0.7, 2, 10, false);
    for v in [0.5, 0.5, 0.5, 0.5, 0.6, 0.6] {
        s.observe(v);
    }
    assert_eq!(s.decay_points(), &[3, 5]);
    assert!((s.lr - 1e-4 * 0.7 * 0.7).abs() < 1e-18);
    assert_eq!(s.best(), Some(0.5));
}

#[test]
fn schedule_higher_is_better_and_stops() {
    let mut s = PlateauSchedule::new(1.0, 0.5, 1, 2, true);
    assert!(s.observe(0.3).improved);
    assert!(s.observe(0.4).improved);
    let o = s.observe(0.4);
    assert!(o.decayed && !o.stop);
    let o = s.observe(0.1);
    assert!(o.decayed && o.stop);
    assert_eq!(s.lr, 0.25);
}

fn full_config_text() -> String {
    TrainConfig::defaults(Task::Match)
        .to_lines()
        .into_iter()
        .filter(|(k, _)| CONFIG_KEYS.contains(&k.as_str()))
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

#[test]
fn config_parsing() {
    let text = full_config_text();
    let c = TrainConfig::parse(&text).unwrap();
    assert_eq!(c, TrainConfig::defaults(Task::Match));
    let round = TrainConfig::parse(&c.to_text()).unwrap();
    assert_eq!(round, c);

    let missing: String = text.lines().filter(|l| !l.starts_with("w_bce")).map(|l| format!("{l}\n")).collect();
    match TrainConfig::parse(&missing) {
        Err(Error::MissingKey(k)) => assert_eq!(k, "w_bce"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(TrainConfig::parse(&format!("{text}bogus = 1\n")), Err(Error::Config(_))));
    assert!(matches!(TrainConfig::parse(&format!("{text}lr = 1\n")), Err(Error::Config(_))));
    let bad = text.replace("lr_decay = 0.7", "lr_decay = 1.5");
    assert!(matches!(TrainConfig::parse(&bad), Err(Error::Config(_))));
    let with_extra = format!("# comment\n{text}max_steps = 7 # trailing\n");
    assert_eq!(TrainConfig::parse(&with_extra).unwrap().max_steps, 7);
}

#[test]
fn bce_at_one_half() {
    let half = 0.5f64.ln();
    assert!((bce_from_log_alpha(half, true).0 + half).abs() < 1e-12);
    assert!((bce_from_log_alpha(half, false).0 + half).abs() < 1e-12);
}

#[test]
fn threshold_tuning() {
    let scored = [(-1.0, true), (-2.0, true), (-3.0, false), (-4.0, false)];
    assert_eq!(tune_threshold(&scored).unwrap(), (-2.0, 1.0));
    // F1 ties between -1 (2/3) and -4 (2 * 2 / 6 = 2/3): the larger threshold wins.
    let tied = [(-1.0, true), (-2.0, false), (-3.0, false), (-4.0, true)];
    assert_eq!(tune_threshold(&tied).unwrap().0, -1.0);
    assert!(tune_threshold(&[(-1.0, true), (-2.0, true)]).is_err());
    assert!(tune_threshold(&[]).is_err());
}

fn match_data(seed: u64) -> (Vec<MatchExample>, Vec<MatchExample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (match_task(&mut rng, 120, 4), match_task(&mut rng, 40, 4))
}

fn csv_of(config: &TrainConfig, data: &TaskData, vocab: usize) -> (Vec<u8>, nsed::training::TrainOutcome) {
    let model = NeuralModel::new(config.model_spec(vocab, vocab), config.seed).unwrap();
    let mut log = Vec::new();
    let out = train(config, model, data, Some(&mut log)).unwrap();
    (log, out)
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let (train_set, valid) = match_data(61);
    let data = TaskData::Match { train: train_set, valid };
    let mut c = tiny_config(Task::Match, EncoderKind::Cnn, 8);
    c.max_steps = 30;
    c.validate_every = 10;
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let (a, _) = one.install(|| csv_of(&c, &data, 6));
    let (b, _) = one.install(|| csv_of(&c, &data, 6));
    let (d, _) = four.install(|| csv_of(&c, &data, 6));
    assert_eq!(a, b);
    assert_eq!(a, d);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn matching_training_improves_and_round_trips() {
    let (train_set, valid) = match_data(62);
    let data = TaskData::Match { train: train_set, valid: valid.clone() };
    let mut c = tiny_config(Task::Match, EncoderKind::Unigram, 8);
    c.max_steps = 150;
    let (_, out) = csv_of(&c, &data, 6);
    // Calling every pair a match gives F1 = 2p / (1 + p) for a positive share p.
    let p = valid.iter().filter(|e| e.label).count() as f64 / valid.len() as f64;
    let all_positive = 2.0 * p / (1.0 + p);
    assert!(out.best_metric > all_positive + 0.05, "F1 {} vs {all_positive}", out.best_metric);
    for r in &out.records {
        let l = &r.loss;
        assert!(l.em >= 0.0 && l.bce >= 0.0 && l.nonmatch >= 0.0 && l.interp >= 0.0);
    }

    let threshold = out.threshold.unwrap();
    let eval = evaluate_match(&out.model, &valid).unwrap();
    assert_eq!(eval.f1, out.best_metric);
    assert_eq!(eval.threshold, threshold);
    assert_eq!(evaluate_match_at(&out.model, &valid, threshold).unwrap(), out.best_metric);

    let vocab = Vocabulary::from_text("<s>\n</s>\na\nb\nc\nd\n").unwrap();
    let ckpt = Checkpoint {
        config: c.clone(),
        model: out.model.clone(),
        source_vocab: vocab.clone(),
        target_vocab: vocab,
        source_tokenization: Tokenization::Chars,
        target_tokenization: Tokenization::Chars,
        threshold: Some(threshold),
        metric: Some(out.best_metric),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.nsed");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    for id in out.model.params.ids() {
        let a: Vec<u32> = out.model.params.values(id).iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.model.params.values(id).iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b, "{}", out.model.params.name(id));
    }
    assert_eq!(back.config, c);
    assert_eq!(back.threshold, Some(threshold));
    assert_eq!(back.metric, Some(out.best_metric));
    assert_eq!(evaluate_match(&back.model, &valid).unwrap().f1, out.best_metric);
    assert_eq!(evaluate_match_at(&back.model, &valid, threshold).unwrap(), out.best_metric);
    let ex = &valid[0];
    assert_eq!(
        matching::score_pair(&back.model, &ex.source, &ex.target).unwrap(),
        matching::score_pair(&out.model, &ex.source, &ex.target).unwrap()
    );
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.nsed");
    std::fs::write(&path, b"NOPE").unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));

    let c = tiny_config(Task::Transduce, EncoderKind::Rnn, 4);
    let model = NeuralModel::new(c.model_spec(6, 6), 1).unwrap();
    let vocab = Vocabulary::from_text("<s>\n</s>\na\nb\nc\nd\n").unwrap();
    let ckpt = Checkpoint {
        config: c,
        model,
        source_vocab: vocab.clone(),
        target_vocab: vocab,
        source_tokenization: Tokenization::Chars,
        target_tokenization: Tokenization::Whitespace,
        threshold: None,
        metric: None,
    };
    ckpt.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
    std::fs::write(&path, &bytes).unwrap();
    std::fs::write(dir.path().join("x.nsed.tgt.vocab"), "<s>\n</s>\na\n").unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(Error::Vocabulary(_))));
}

#[test]
fn copy_task_reaches_zero_error() {
    let (pairs, items) = copy_task();
    let data = TaskData::Transduce { train: pairs, valid: items.clone() };
    let mut c = tiny_config(Task::Transduce, EncoderKind::Unigram, 16);
    c.max_steps = 200;
    let (_, out) = csv_of(&c, &data, 6);
    let eval = evaluate_transduction(&out.model, &items, &c).unwrap();
    assert_eq!(eval.wer, 0.0);
    assert_eq!(eval.cer, out.best_metric);
}

#[test]
fn subsampling_limits_the_training_pool() {
    let (pairs, items) = copy_task();
    let data = TaskData::Transduce { train: pairs, valid: items };
    let mut c = tiny_config(Task::Transduce, EncoderKind::Unigram, 4);
    c.train_subsample = 3;
    c.batch_size = 512;
    c.max_steps = 2;
    c.validate_every = 1;
    let (_, out) = csv_of(&c, &data, 6);
    assert_eq!(out.steps, 2);
    assert_eq!(out.records.len(), 2);
}

#[test]
fn non_finite_parameters_abort_training() {
    let (pairs, items) = copy_task();
    let data = TaskData::Transduce { train: pairs, valid: items };
    let c = tiny_config(Task::Transduce, EncoderKind::Unigram, 4);
    let mut model = NeuralModel::new(c.model_spec(6, 6), 1).unwrap();
    let id = model.params.by_name("head.bias").unwrap();
    model.params.set_value(id, 0, f32::NAN);
    match train(&c, model, &data, None) {
        Err(Error::Numerical(msg)) => assert!(msg.contains("step 1"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn task_mismatch_is_a_config_error() {
    let (pairs, items) = copy_task();
    let data = TaskData::Transduce { train: pairs, valid: items };
    let c = tiny_config(Task::Match, EncoderKind::Unigram, 4);
    let model = NeuralModel::new(c.model_spec(6, 6), 1).unwrap();
    assert!(matches!(train(&c, model, &data, None), Err(Error::Config(_))));
}
