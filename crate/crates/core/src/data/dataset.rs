use std::path::Path;

use crate::error::{Error, Result};
use crate::matching::MatchExample;
use crate::model::RESERVED;
use crate::training::TransductionItem;
use crate::transduction::TransductionPair;

use super::cognates::{read_match_split, LabeledPair};
use super::transduction::{load_transduction, TransductionCorpus, TransductionFormat};
use super::vocab::{Tokenization, Vocabulary};

/// Labelled pairs read from `train.tsv`, `valid.tsv` and, if present, `test.tsv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchSplits {
    pub train: Vec<LabeledPair>,
    pub valid: Vec<LabeledPair>,
    pub test: Option<Vec<LabeledPair>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransductionSplits {
    pub train: TransductionCorpus,
    pub valid: TransductionCorpus,
    pub test: Option<TransductionCorpus>,
}

fn require(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(Error::Data(format!("{} not found", p.display())));
    }
    Ok(p)
}

pub fn load_match_dir(dir: &Path, tok: Tokenization) -> Result<MatchSplits> {
    let train = read_match_split(&require(dir, "train.tsv")?, tok)?;
    let valid = read_match_split(&require(dir, "valid.tsv")?, tok)?;
    let test_path = dir.join("test.tsv");
    let test = if test_path.is_file() { Some(read_match_split(&test_path, tok)?) } else { None };
    Ok(MatchSplits { train, valid, test })
}

/// Reads the three splits, detecting each column's tokenization on the training
/// file and applying it to the others.
pub fn load_transduction_dir(dir: &Path) -> Result<TransductionSplits> {
    let train = load_transduction(&require(dir, "train.tsv")?, TransductionFormat::Tsv, None, None)?;
    let (s, t) = (train.source_tokenization, train.target_tokenization);
    let valid = load_transduction(&require(dir, "valid.tsv")?, TransductionFormat::Tsv, s, t)?;
    let test_path = dir.join("test.tsv");
    let test = if test_path.is_file() {
        Some(load_transduction(&test_path, TransductionFormat::Tsv, s, t)?)
    } else {
        None
    };
    Ok(TransductionSplits { train, valid, test })
}

/// One vocabulary covering both sides of every pair.
pub fn match_vocabulary(splits: &[&[LabeledPair]]) -> Vocabulary {
    let seqs: Vec<&Vec<String>> = splits.iter().flat_map(|s| s.iter().flat_map(|p| [&p.source, &p.target])).collect();
    Vocabulary::build(seqs)
}

pub fn encode_match(pairs: &[LabeledPair], vocab: &Vocabulary) -> Result<Vec<MatchExample>> {
    pairs
        .iter()
        .map(|p| Ok(MatchExample { source: vocab.encode(&p.source)?, target: vocab.encode(&p.target)?, label: p.label }))
        .collect()
}

/// Source and target vocabularies over all given corpora.
pub fn transduction_vocabularies(corpora: &[&TransductionCorpus]) -> (Vocabulary, Vocabulary) {
    let src = Vocabulary::build(corpora.iter().flat_map(|c| c.pairs.iter().map(|p| &p.0)));
    let tgt = Vocabulary::build(corpora.iter().flat_map(|c| c.pairs.iter().map(|p| &p.1)));
    (src, tgt)
}

pub fn encode_pairs(corpus: &TransductionCorpus, src: &Vocabulary, tgt: &Vocabulary) -> Result<Vec<TransductionPair>> {
    corpus
        .pairs
        .iter()
        .map(|(s, t)| Ok(TransductionPair { source: src.encode(s)?, target: tgt.encode(t)? }))
        .collect()
}

/// One item per distinct source with all of its targets as references.
pub fn encode_items(corpus: &TransductionCorpus, src: &Vocabulary, tgt: &Vocabulary) -> Result<Vec<TransductionItem>> {
    corpus
        .groups
        .iter()
        .map(|g| {
            let source = src.encode(&corpus.pairs[g[0]].0)?;
            let references = g.iter().map(|&k| tgt.encode(&corpus.pairs[k].1)).collect::<Result<Vec<_>>>()?;
            Ok(TransductionItem { source, references })
        })
        .collect()
}

/// Vocabulary ids shifted to dense 0-based symbol indices.
pub fn symbol_indices(ids: &[u32]) -> Vec<usize> {
    ids.iter().map(|&id| (id - RESERVED) as usize).collect()
}
