use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use nsed::checkpoint::{Checkpoint, StatCheckpoint};
use nsed::data::{
    binary_f1, build_cognate_pairs, encode_items, encode_match, encode_pairs, load_match_dir, load_transduction,
    load_transduction_dir, match_vocabulary, read_match_split, read_pharaoh, read_wordlist, split_transduction,
    symbol_indices, transduction_vocabularies, write_match_split, write_transduction_tsv, AlignmentLinkSet,
    LabeledPair, LinkCounts, Tokenization, TransductionFormat,
};
use nsed::matching::tune_threshold;
use nsed::model::{NeuralModel, Task, RESERVED};
use nsed::stat::{train_em, OperationTable};
use nsed::training::{
    evaluate_match_at, evaluate_transduction, train as run_training, TaskData, TrainConfig, TrainOutcome,
};
use nsed::transduction::{decode, DecodeOptions};
use nsed::{Error, Result};

use crate::model::Loaded;
use crate::{ApplyArgs, EmTrainArgs, EvalArgs, PrepareCommand, TaskArg, TrainArgs, TransduceArgs};

pub const DEFAULT_SEED: u64 = 13;

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Non-empty lines of a file, or of standard input for `-`.
fn read_lines(path: &Path) -> Result<Vec<String>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
    };
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

fn split_pair<'a>(line: &'a str, path: &Path, lineno: usize) -> Result<(&'a str, &'a str)> {
    let mut fields = line.split('\t');
    match (fields.next(), fields.next()) {
        (Some(s), Some(t)) => Ok((s.trim(), t.trim())),
        _ => Err(Error::parse(path.display().to_string(), lineno, "expected source<TAB>target")),
    }
}

fn encoded_pairs(model: &Loaded, path: &Path) -> Result<Vec<(Vec<u32>, Vec<u32>)>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(k, line)| {
            let (s, t) = split_pair(line, path, k + 1)?;
            Ok((model.encode_source(s)?, model.encode_target(t)?))
        })
        .collect()
}

fn training_log(path: &Path, config: &TrainConfig, model: NeuralModel, data: &TaskData) -> Result<TrainOutcome> {
    let mut log = create(path)?;
    let outcome = run_training(config, model, data, Some(&mut log))?;
    log.flush().map_err(|e| Error::io(path, e))?;
    Ok(outcome)
}

pub fn train(a: TrainArgs, seed: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let mut config = TrainConfig::parse(&text)?;
    let task = match a.task {
        TaskArg::Match => Task::Match,
        TaskArg::Transduce => Task::Transduce,
    };
    if config.task != task {
        return Err(Error::Config(format!("--task {task} but the configuration says task={}", config.task)));
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(n) = a.train_subsample {
        config.train_subsample = n;
    }
    if let Some(n) = a.max_steps {
        config.max_steps = n;
    }
    config.validate()?;
    let metrics = a.metrics.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".metrics.csv");
        PathBuf::from(s)
    });

    let mut out = io::stdout().lock();
    match task {
        Task::Match => {
            let tok: Tokenization = a.tokenization.into();
            let splits = load_match_dir(&a.data, tok)?;
            let mut all: Vec<&[LabeledPair]> = vec![&splits.train, &splits.valid];
            if let Some(t) = &splits.test {
                all.push(t);
            }
            let vocab = match_vocabulary(&all);
            let data = TaskData::Match {
                train: encode_match(&splits.train, &vocab)?,
                valid: encode_match(&splits.valid, &vocab)?,
            };
            let test = splits.test.as_ref().map(|t| encode_match(t, &vocab)).transpose()?;
            let model = NeuralModel::new(config.model_spec(vocab.len(), vocab.len()), config.seed)?;
            let outcome = training_log(&metrics, &config, model, &data)?;
            let threshold = outcome.threshold.expect("matching validation tunes a threshold");
            writeln!(out, "steps={}", outcome.steps).map_err(stdout_err)?;
            writeln!(out, "best_step={}", outcome.best_step).map_err(stdout_err)?;
            writeln!(out, "valid_f1={}", outcome.best_metric).map_err(stdout_err)?;
            writeln!(out, "threshold={threshold}").map_err(stdout_err)?;
            if let Some(test) = &test {
                writeln!(out, "test_f1={}", evaluate_match_at(&outcome.model, test, threshold)?).map_err(stdout_err)?;
            }
            Checkpoint {
                config,
                model: outcome.model,
                source_vocab: vocab.clone(),
                target_vocab: vocab,
                source_tokenization: tok,
                target_tokenization: tok,
                threshold: Some(threshold),
                metric: Some(outcome.best_metric),
            }
            .save(&a.out)
        }
        Task::Transduce => {
            let splits = load_transduction_dir(&a.data)?;
            let mut all = vec![&splits.train, &splits.valid];
            if let Some(t) = &splits.test {
                all.push(t);
            }
            let (src, tgt) = transduction_vocabularies(&all);
            let data = TaskData::Transduce {
                train: encode_pairs(&splits.train, &src, &tgt)?,
                valid: encode_items(&splits.valid, &src, &tgt)?,
            };
            let test = splits.test.as_ref().map(|t| encode_items(t, &src, &tgt)).transpose()?;
            let model = NeuralModel::new(config.model_spec(src.len(), tgt.len()), config.seed)?;
            let outcome = training_log(&metrics, &config, model, &data)?;
            writeln!(out, "steps={}", outcome.steps).map_err(stdout_err)?;
            writeln!(out, "best_step={}", outcome.best_step).map_err(stdout_err)?;
            writeln!(out, "valid_cer={}", outcome.best_metric).map_err(stdout_err)?;
            if let Some(test) = &test {
                let e = evaluate_transduction(&outcome.model, test, &config)?;
                writeln!(out, "test_cer={}\ntest_wer={}", e.cer, e.wer).map_err(stdout_err)?;
            }
            Checkpoint {
                config,
                model: outcome.model,
                source_vocab: src,
                target_vocab: tgt,
                source_tokenization: splits.train.source_tokenization.unwrap_or(Tokenization::Chars),
                target_tokenization: splits.train.target_tokenization.unwrap_or(Tokenization::Chars),
                threshold: None,
                metric: Some(outcome.best_metric),
            }
            .save(&a.out)
        }
    }
}

pub fn classify(a: ApplyArgs) -> Result<()> {
    let model = Loaded::load(&a.model)?;
    model.require(Task::Match, "classify")?;
    let threshold = model.threshold().ok_or_else(|| Error::Checkpoint("checkpoint stores no threshold".into()))?;
    let pairs = encoded_pairs(&model, &a.input)?;
    let scores = pairs.par_iter().map(|(s, t)| model.score(s, t)).collect::<Result<Vec<_>>>()?;
    let mut out = io::stdout().lock();
    for score in scores {
        writeln!(out, "{score}\t{}", u8::from(score >= threshold)).map_err(stdout_err)?;
    }
    Ok(())
}

pub fn align(a: ApplyArgs) -> Result<()> {
    let model = Loaded::load(&a.model)?;
    let pairs = encoded_pairs(&model, &a.input)?;
    let scripts = pairs.par_iter().map(|(s, t)| model.align(s, t)).collect::<Result<Vec<_>>>()?;
    let mut out = io::stdout().lock();
    for ((s, t), script) in pairs.iter().zip(&scripts) {
        let mut fields = model.script_tokens(script, s, t);
        fields.push(script.log_score.to_string());
        writeln!(out, "{}", fields.join("\t")).map_err(stdout_err)?;
    }
    Ok(())
}

pub fn transduce(a: TransduceArgs) -> Result<()> {
    let model = Loaded::load(&a.model)?;
    model.require(Task::Transduce, "transduce")?;
    let Loaded::Neural(ckpt) = &model else { unreachable!("statistical models only match") };
    let sources = read_lines(&a.input)?
        .iter()
        .map(|line| model.encode_source(line.split('\t').next().unwrap_or("").trim()))
        .collect::<Result<Vec<_>>>()?;
    let outputs = sources
        .par_iter()
        .map(|s| {
            let defaults = ckpt.config.decode_options(s.len());
            let opts = DecodeOptions {
                beam: a.beam.unwrap_or(defaults.beam),
                len_norm: a.len_norm.unwrap_or(defaults.len_norm),
                max_len: a.max_len.unwrap_or(defaults.max_len),
            };
            let hyp = decode(&ckpt.model, s, &opts)?;
            let script = if a.emit_script { Some(model.align(s, &hyp.symbols)?) } else { None };
            Ok((hyp, script))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = io::stdout().lock();
    for (s, (hyp, script)) in sources.iter().zip(&outputs) {
        let text = model.render_target(&hyp.symbols);
        match script {
            Some(script) => {
                let ops = model.script_tokens(script, s, &hyp.symbols).join(" ");
                writeln!(out, "{text}\t{ops}")
            }
            None => writeln!(out, "{text}"),
        }
        .map_err(stdout_err)?;
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let model = Loaded::load(&a.model)?;
    let path = if a.data.is_dir() { a.data.join(format!("{}.tsv", a.split)) } else { a.data.clone() };
    let mut out = io::stdout().lock();
    let pairs: Vec<(Vec<u32>, Vec<u32>)> = match model.task() {
        Task::Match => {
            let threshold =
                model.threshold().ok_or_else(|| Error::Checkpoint("checkpoint stores no threshold".into()))?;
            let data = read_match_split(&path, model.source_tokenization())?;
            let encoded = data
                .iter()
                .map(|p| Ok((model.source_vocab().encode(&p.source)?, model.target_vocab().encode(&p.target)?)))
                .collect::<Result<Vec<_>>>()?;
            let preds = encoded
                .par_iter()
                .map(|(s, t)| Ok(model.score(s, t)? >= threshold))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<bool> = data.iter().map(|p| p.label).collect();
            writeln!(out, "f1={}", binary_f1(&preds, &labels)?).map_err(stdout_err)?;
            writeln!(out, "threshold={threshold}").map_err(stdout_err)?;
            writeln!(out, "pairs={}", data.len()).map_err(stdout_err)?;
            encoded
        }
        Task::Transduce => {
            let Loaded::Neural(ckpt) = &model else { unreachable!("statistical models only match") };
            let corpus = load_transduction(
                &path,
                TransductionFormat::Tsv,
                Some(ckpt.source_tokenization),
                Some(ckpt.target_tokenization),
            )?;
            let items = encode_items(&corpus, &ckpt.source_vocab, &ckpt.target_vocab)?;
            let mut config = ckpt.config.clone();
            config.beam = a.beam.unwrap_or(config.beam);
            config.len_norm = a.len_norm.unwrap_or(config.len_norm);
            let e = evaluate_transduction(&ckpt.model, &items, &config)?;
            writeln!(out, "cer={}\nwer={}\nitems={}", e.cer, e.wer, items.len()).map_err(stdout_err)?;
            encode_pairs(&corpus, &ckpt.source_vocab, &ckpt.target_vocab)?
                .into_iter()
                .map(|p| (p.source, p.target))
                .collect()
        }
    };

    if let Some(dump) = &a.dump_alpha {
        let (s, t) = pairs
            .get(a.pair)
            .ok_or_else(|| Error::Data(format!("--pair {} but the data has {} pairs", a.pair, pairs.len())))?;
        let table = model.alpha(s, t)?;
        std::fs::write(dump, table.to_csv()).map_err(|e| Error::io(dump, e))?;
        writeln!(out, "alpha_score={}", table.total().exp()).map_err(stdout_err)?;
        writeln!(out, "log_alpha_score={}", table.total()).map_err(stdout_err)?;
    }

    if let Some(ref_path) = &a.reference_alignments {
        let refs = read_pharaoh(ref_path, a.index_base.into())?;
        if refs.len() != pairs.len() {
            return Err(Error::Data(format!(
                "{} has {} alignments for {} pairs",
                ref_path.display(),
                refs.len(),
                pairs.len()
            )));
        }
        for (k, ((s, t), r)) in pairs.iter().zip(&refs).enumerate() {
            if !r.within_bounds(s.len(), t.len()) {
                return Err(Error::Data(format!("{}:{}: link outside the pair", ref_path.display(), k + 1)));
            }
        }
        let parts = pairs
            .par_iter()
            .zip(&refs)
            .map(|((s, t), r)| {
                let script = model.align(s, t)?;
                Ok(LinkCounts::of(&AlignmentLinkSet::new(script.substitution_links()), r))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut counts = LinkCounts::default();
        for c in parts {
            counts.add(c);
        }
        writeln!(out, "alignment_precision={}", counts.precision()).map_err(stdout_err)?;
        writeln!(out, "alignment_recall={}", counts.recall()).map_err(stdout_err)?;
        writeln!(out, "alignment_f1={}", counts.f1()).map_err(stdout_err)?;
    }
    Ok(())
}

pub fn em_train(a: EmTrainArgs) -> Result<()> {
    let tok: Tokenization = a.tokenization.into();
    let splits = load_match_dir(&a.data, tok)?;
    let mut all: Vec<&[LabeledPair]> = vec![&splits.train, &splits.valid];
    if let Some(t) = &splits.test {
        all.push(t);
    }
    let vocab = match_vocabulary(&all);
    let symbols = vocab.len() - RESERVED as usize;
    let corpus: Vec<(Vec<usize>, Vec<usize>)> = encode_match(&splits.train, &vocab)?
        .into_iter()
        .filter(|e| e.label)
        .map(|e| (symbol_indices(&e.source), symbol_indices(&e.target)))
        .collect();
    let init = OperationTable::uniform(symbols, symbols);
    let (table, trace) = train_em(&corpus, init, a.iterations, a.tolerance, a.smoothing)?;
    let table = table.rounded_to_f32();

    let score = |pairs: &[LabeledPair]| -> Result<Vec<(f64, bool)>> {
        encode_match(pairs, &vocab)?
            .par_iter()
            .map(|e| Ok((table.log_likelihood(&symbol_indices(&e.source), &symbol_indices(&e.target))?, e.label)))
            .collect()
    };
    let (threshold, valid_f1) = tune_threshold(&score(&splits.valid)?)?;
    let mut out = io::stdout().lock();
    writeln!(out, "iterations={}", trace.log_likelihoods.len()).map_err(stdout_err)?;
    writeln!(out, "converged={}", trace.converged).map_err(stdout_err)?;
    if let Some(ll) = trace.log_likelihoods.last() {
        writeln!(out, "log_likelihood={ll}").map_err(stdout_err)?;
    }
    writeln!(out, "valid_f1={valid_f1}\nthreshold={threshold}").map_err(stdout_err)?;
    if let Some(test) = &splits.test {
        let scored = score(test)?;
        let preds: Vec<bool> = scored.iter().map(|&(s, _)| s >= threshold).collect();
        let labels: Vec<bool> = scored.iter().map(|&(_, l)| l).collect();
        writeln!(out, "test_f1={}", binary_f1(&preds, &labels)?).map_err(stdout_err)?;
    }
    StatCheckpoint { table, vocab, tokenization: tok, smoothing: a.smoothing, threshold: Some(threshold), metric: Some(valid_f1) }
        .save(&a.out)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn prepare(cmd: PrepareCommand, seed: u64) -> Result<()> {
    let mut out = io::stdout().lock();
    match cmd {
        PrepareCommand::Cognates { wordlist, out: dir, negatives, valid, test, max_pairs } => {
            let words = read_wordlist(&wordlist)?;
            let mut splits = build_cognate_pairs(&words, negatives, seed, valid, test)?;
            if let Some(max) = max_pairs {
                let keep = max.checked_sub(valid + test).filter(|&k| k > 0).ok_or_else(|| {
                    Error::Config(format!("--max-pairs {max} leaves no training pairs after {valid}+{test}"))
                })?;
                splits.train.truncate(keep);
            }
            create_dir(&dir)?;
            write_match_split(&dir.join("train.tsv"), &splits.train)?;
            write_match_split(&dir.join("valid.tsv"), &splits.valid)?;
            write_match_split(&dir.join("test.tsv"), &splits.test)?;
            writeln!(out, "words={}\nclasses={}", splits.words, splits.classes).map_err(stdout_err)?;
            writeln!(out, "train={}\nvalid={}\ntest={}", splits.train.len(), splits.valid.len(), splits.test.len())
                .map_err(stdout_err)?;
        }
        PrepareCommand::Transduction { input, format, out: dir, valid, test, max_groups } => {
            let format: TransductionFormat = format.parse()?;
            let mut corpus = load_transduction(&input, format, None, None)?;
            if let Some(k) = max_groups {
                corpus = corpus.subsample_groups(k, seed);
            }
            let (tr, va, te) = split_transduction(&corpus, valid, test, seed)?;
            create_dir(&dir)?;
            write_transduction_tsv(&dir.join("train.tsv"), &tr)?;
            write_transduction_tsv(&dir.join("valid.tsv"), &va)?;
            write_transduction_tsv(&dir.join("test.tsv"), &te)?;
            writeln!(out, "train={}\nvalid={}\ntest={}", tr.len(), va.len(), te.len()).map_err(stdout_err)?;
        }
    }
    Ok(())
}
