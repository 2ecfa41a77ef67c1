use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{cer, wer, AlignmentLinkSet, LinkCounts};
use crate::error::{Error, Result};
use crate::matching::{self, MatchExample};
use crate::model::{NeuralModel, Task};
use crate::nn::{Gradients, ParamStore};
use crate::transduction::{self, TransductionPair};

use super::adam::Adam;
use super::config::TrainConfig;
use super::losses::PairLoss;
use super::schedule::PlateauSchedule;

/// A source string with every acceptable output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransductionItem {
    pub source: Vec<u32>,
    pub references: Vec<Vec<u32>>,
}

#[derive(Clone, Debug)]
pub enum TaskData {
    Match { train: Vec<MatchExample>, valid: Vec<MatchExample> },
    Transduce { train: Vec<TransductionPair>, valid: Vec<TransductionItem> },
}

impl TaskData {
    pub fn task(&self) -> Task {
        match self {
            TaskData::Match { .. } => Task::Match,
            TaskData::Transduce { .. } => Task::Transduce,
        }
    }

    fn train_len(&self) -> usize {
        match self {
            TaskData::Match { train, .. } => train.len(),
            TaskData::Transduce { train, .. } => train.len(),
        }
    }
}

/// One row of the metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationRecord {
    pub step: usize,
    pub lr: f64,
    /// Mean training loss over the steps since the previous validation.
    pub loss: PairLoss,
    /// F1 for matching, CER for transduction.
    pub metric: f64,
    /// Log-space threshold tuned at this validation (matching only).
    pub threshold: Option<f64>,
}

pub const METRICS_HEADER: &str = "step,lr,loss,em,nll,bce,nonmatch,interp,metric";

impl ValidationRecord {
    pub fn csv_line(&self) -> String {
        let l = &self.loss;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step, self.lr, l.total, l.em, l.nll, l.bce, l.nonmatch, l.interp, self.metric
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation.
    pub model: NeuralModel,
    pub best_metric: f64,
    pub best_step: usize,
    pub threshold: Option<f64>,
    pub records: Vec<ValidationRecord>,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchEval {
    pub f1: f64,
    /// Log-space score threshold.
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransductionEval {
    /// Mean per-item character error rate.
    pub cer: f64,
    pub wer: f64,
}

/// Scores every example and tunes the threshold that maximises F1.
pub fn evaluate_match(model: &NeuralModel, examples: &[MatchExample]) -> Result<MatchEval> {
    let scored = examples
        .par_iter()
        .map(|e| Ok((matching::score_pair(model, &e.source, &e.target)?, e.label)))
        .collect::<Result<Vec<_>>>()?;
    let (threshold, f1) = matching::tune_threshold(&scored)?;
    Ok(MatchEval { f1, threshold })
}

/// F1 of fixed-threshold predictions.
pub fn evaluate_match_at(model: &NeuralModel, examples: &[MatchExample], log_threshold: f64) -> Result<f64> {
    let preds = examples
        .par_iter()
        .map(|e| Ok(matching::classify(model, &e.source, &e.target, log_threshold)?.1))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    crate::data::binary_f1(&preds, &labels)
}

/// Decodes every item and scores the outputs against their references.
pub fn evaluate_transduction(
    model: &NeuralModel,
    items: &[TransductionItem],
    config: &TrainConfig,
) -> Result<TransductionEval> {
    if items.is_empty() {
        return Err(Error::Empty("no evaluation items".into()));
    }
    let hyps = items
        .par_iter()
        .map(|it| Ok(transduction::decode(model, &it.source, &config.decode_options(it.source.len()))?.symbols))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (h, it) in hyps.iter().zip(items) {
        total += cer(h, &it.references)?;
    }
    let refs: Vec<Vec<Vec<u32>>> = items.iter().map(|it| it.references.clone()).collect();
    Ok(TransductionEval { cer: total / items.len() as f64, wer: wer(&hyps, &refs)? })
}

/// Micro-averaged link counts of Viterbi substitutions against reference
/// alignments, one reference set per pair.
pub fn evaluate_alignment(
    model: &NeuralModel,
    pairs: &[TransductionPair],
    references: &[AlignmentLinkSet],
) -> Result<LinkCounts> {
    if pairs.len() != references.len() {
        return Err(Error::Dimension(format!("{} pairs for {} reference alignments", pairs.len(), references.len())));
    }
    let counts = pairs
        .par_iter()
        .zip(references)
        .map(|(p, r)| {
            let script = match model.spec.task {
                Task::Match => matching::align(model, &p.source, &p.target)?,
                Task::Transduce => transduction::align(model, &p.source, &p.target)?,
            };
            let predicted = AlignmentLinkSet(script.substitution_links().into_iter().collect());
            Ok(LinkCounts::of(&predicted, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = LinkCounts::default();
    for c in counts {
        total.add(c);
    }
    Ok(total)
}

fn validate(model: &NeuralModel, data: &TaskData, config: &TrainConfig) -> Result<(f64, Option<f64>)> {
    match data {
        TaskData::Match { valid, .. } => {
            let e = evaluate_match(model, valid)?;
            Ok((e.f1, Some(e.threshold)))
        }
        TaskData::Transduce { valid, .. } => Ok((evaluate_transduction(model, valid, config)?.cer, None)),
    }
}

fn example_loss(
    model: &NeuralModel,
    data: &TaskData,
    index: usize,
    config: &TrainConfig,
    grads: &mut Gradients,
) -> Result<PairLoss> {
    match data {
        TaskData::Match { train, .. } => matching::pair_loss(model, &train[index], &config.weights, Some(grads)),
        TaskData::Transduce { train, .. } => {
            transduction::pair_loss(model, &train[index], &config.weights, Some(grads))
        }
    }
}

/// Mean loss and gradient over a batch. Examples are processed in chunks of
/// `micro_batch` and the chunk results are summed in order, so the result does
/// not depend on the number of threads.
fn batch_gradient(
    model: &NeuralModel,
    data: &TaskData,
    batch: &[usize],
    config: &TrainConfig,
) -> Result<(PairLoss, Gradients)> {
    let parts = batch
        .par_chunks(config.micro_batch)
        .map(|chunk| {
            let mut grads = Gradients::zeros_like(&model.params);
            let mut loss = PairLoss::default();
            for &idx in chunk {
                loss += &example_loss(model, data, idx, config, &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().ok_or_else(|| Error::Empty("empty batch".into()))?;
    for (l, g) in iter {
        loss += &l;
        grads.add(&g);
    }
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    Ok((loss.scaled(scale), grads))
}

/// Minibatch Adam on the task loss with plateau learning-rate decay. The
/// returned model carries the parameters of the best validation. When `log`
/// is given, a CSV row is written after each validation.
pub fn train(
    config: &TrainConfig,
    mut model: NeuralModel,
    data: &TaskData,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.spec.task != data.task() || config.task != data.task() {
        return Err(Error::Config("task of the model, configuration and data differ".into()));
    }
    if data.train_len() == 0 {
        return Err(Error::Empty("no training examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool: Vec<usize> = (0..data.train_len()).collect();
    if config.train_subsample > 0 && config.train_subsample < pool.len() {
        pool.shuffle(&mut rng);
        pool.truncate(config.train_subsample);
        pool.sort_unstable();
    }

    let higher_is_better = data.task() == Task::Match;
    let mut schedule =
        PlateauSchedule::new(config.lr, config.lr_decay, config.patience, config.max_decays, higher_is_better);
    let mut adam = Adam::new(&model.params, config.lr);
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "{METRICS_HEADER}").map_err(|e| Error::io("metrics log", e))?;
    }

    let mut best: Option<(ParamStore, f64, usize, Option<f64>)> = None;
    let mut records = Vec::new();
    let mut since = PairLoss::default();
    let mut since_steps = 0usize;
    let mut step = 0usize;
    let mut epoch = 0usize;
    'outer: loop {
        pool.shuffle(&mut rng);
        for (b, batch) in pool.chunks(config.batch_size).enumerate() {
            let (loss, grads) = batch_gradient(&model, data, batch, config)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at step {} (epoch {epoch}, batch {b})",
                    step + 1
                )));
            }
            adam.lr = schedule.lr;
            adam.step(&mut model.params, &grads);
            step += 1;
            since += &loss;
            since_steps += 1;

            let last = config.max_steps > 0 && step >= config.max_steps;
            if step % config.validate_every == 0 || last {
                let (metric, threshold) = validate(&model, data, config)?;
                if metric.is_nan() {
                    return Err(Error::Numerical(format!("validation metric is NaN at step {step}")));
                }
                let record = ValidationRecord {
                    step,
                    lr: schedule.lr,
                    loss: since.scaled(1.0 / since_steps as f64),
                    metric,
                    threshold,
                };
                log::info!("step {step}: loss {:.4} metric {metric:.4} lr {:e}", record.loss.total, schedule.lr);
                if let Some(w) = log.as_deref_mut() {
                    writeln!(w, "{}", record.csv_line()).map_err(|e| Error::io("metrics log", e))?;
                }
                records.push(record);
                since = PairLoss::default();
                since_steps = 0;
                let obs = schedule.observe(metric);
                if obs.improved {
                    best = Some((model.params.clone(), metric, step, threshold));
                }
                if obs.stop || last {
                    break 'outer;
                }
            }
        }
        epoch += 1;
    }

    let (params, best_metric, best_step, threshold) = best.expect("at least one validation ran");
    model.params = params;
    Ok(TrainOutcome { model, best_metric, best_step, threshold, records, steps: step })
}
