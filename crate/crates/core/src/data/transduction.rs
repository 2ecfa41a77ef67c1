use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::vocab::{tokenize, Tokenization};
use super::{read_text, write_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransductionFormat {
    /// `source<TAB>target` per line.
    Tsv,
    /// `WORD  PH1 PH2 ...`, with `WORD(k)` marking alternative pronunciations.
    CmuDict,
}

impl FromStr for TransductionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(TransductionFormat::Tsv),
            "cmudict" => Ok(TransductionFormat::CmuDict),
            other => Err(Error::Config(format!("unknown data format `{other}` (expected tsv or cmudict)"))),
        }
    }
}

/// Symbol-level pairs plus the grouping of pairs that share a source string.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransductionCorpus {
    pub pairs: Vec<(Vec<String>, Vec<String>)>,
    /// Indices into `pairs`, one group per distinct source, in order of first appearance.
    pub groups: Vec<Vec<usize>>,
    pub source_tokenization: Option<Tokenization>,
    pub target_tokenization: Option<Tokenization>,
}

impl TransductionCorpus {
    fn from_pairs(pairs: Vec<(Vec<String>, Vec<String>)>, src: Tokenization, tgt: Tokenization) -> Self {
        let mut index: HashMap<Vec<String>, usize> = HashMap::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, (s, _)) in pairs.iter().enumerate() {
            match index.get(s) {
                Some(&g) => groups[g].push(k),
                None => {
                    index.insert(s.clone(), groups.len());
                    groups.push(vec![k]);
                }
            }
        }
        Self { pairs, groups, source_tokenization: Some(src), target_tokenization: Some(tgt) }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The corpus restricted to the given groups, keeping their order.
    pub fn select_groups(&self, groups: &[usize]) -> Self {
        let pairs: Vec<_> = groups.iter().flat_map(|&g| self.groups[g].iter().map(|&k| self.pairs[k].clone())).collect();
        Self::from_pairs(
            pairs,
            self.source_tokenization.unwrap_or(Tokenization::Chars),
            self.target_tokenization.unwrap_or(Tokenization::Whitespace),
        )
    }

    /// `count` randomly chosen source groups in their original order; the whole
    /// corpus when it has no more groups than that.
    pub fn subsample_groups(&self, count: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..self.groups.len()).collect();
        if count < order.len() {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            order.truncate(count);
            order.sort_unstable();
        }
        self.select_groups(&order)
    }
}

/// Splits a field with whitespace tokens when any line of its column contains
/// whitespace, otherwise into characters.
fn detect(fields: &[&str]) -> Tokenization {
    if fields.iter().any(|f| f.trim().contains(char::is_whitespace)) {
        Tokenization::Whitespace
    } else {
        Tokenization::Chars
    }
}

/// Loads a transduction corpus. For TSV input the tokenization of each column is
/// detected unless given.
pub fn load_transduction(
    path: &Path,
    format: TransductionFormat,
    source_tok: Option<Tokenization>,
    target_tok: Option<Tokenization>,
) -> Result<TransductionCorpus> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    match format {
        TransductionFormat::Tsv => {
            let mut rows = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 2 {
                    return Err(Error::parse(&name, lineno + 1, format!("expected 2 tab-separated fields, got {}", fields.len())));
                }
                rows.push((lineno + 1, fields[0].trim(), fields[1].trim()));
            }
            let src_tok = source_tok.unwrap_or_else(|| detect(&rows.iter().map(|r| r.1).collect::<Vec<_>>()));
            let tgt_tok = target_tok.unwrap_or_else(|| detect(&rows.iter().map(|r| r.2).collect::<Vec<_>>()));
            let mut pairs = Vec::with_capacity(rows.len());
            for (lineno, s, t) in rows {
                let (s, t) = (tokenize(s, src_tok), tokenize(t, tgt_tok));
                if s.is_empty() || t.is_empty() {
                    return Err(Error::parse(&name, lineno, "empty source or target"));
                }
                pairs.push((s, t));
            }
            Ok(TransductionCorpus::from_pairs(pairs, src_tok, tgt_tok))
        }
        TransductionFormat::CmuDict => {
            let src_tok = source_tok.unwrap_or(Tokenization::Chars);
            let mut pairs = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split(" #").next().unwrap_or("").trim();
                if line.is_empty() || line.starts_with(";;;") {
                    continue;
                }
                let (word, phones) = line
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| Error::parse(&name, lineno + 1, "expected a word followed by phonemes"))?;
                let base = strip_variant(word);
                let phones = tokenize(phones, Tokenization::Whitespace);
                if base.is_empty() || phones.is_empty() {
                    return Err(Error::parse(&name, lineno + 1, "empty word or pronunciation"));
                }
                pairs.push((tokenize(base, src_tok), phones));
            }
            Ok(TransductionCorpus::from_pairs(pairs, src_tok, Tokenization::Whitespace))
        }
    }
}

/// `WORD(2)` -> `WORD`.
fn strip_variant(word: &str) -> &str {
    if let Some(open) = word.rfind('(') {
        if word.ends_with(')') && word[open + 1..word.len() - 1].chars().all(|c| c.is_ascii_digit()) && open > 0 {
            return &word[..open];
        }
    }
    word
}

/// Random split by source group, so alternative references never straddle splits.
pub fn split_transduction(
    corpus: &TransductionCorpus,
    valid_groups: usize,
    test_groups: usize,
    seed: u64,
) -> Result<(TransductionCorpus, TransductionCorpus, TransductionCorpus)> {
    let total = corpus.groups.len();
    if total <= valid_groups + test_groups {
        return Err(Error::Data(format!(
            "{total} source groups cannot fill validation ({valid_groups}) and test ({test_groups}) splits"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = &order[total - test_groups..];
    let valid = &order[total - test_groups - valid_groups..total - test_groups];
    let train = &order[..total - test_groups - valid_groups];
    Ok((corpus.select_groups(train), corpus.select_groups(valid), corpus.select_groups(test)))
}

/// Writes `source<TAB>target` lines; whitespace-tokenized columns are space-joined.
pub fn write_transduction_tsv(path: &Path, corpus: &TransductionCorpus) -> Result<()> {
    let join = |seq: &[String], tok: Option<Tokenization>| match tok {
        Some(Tokenization::Whitespace) => seq.join(" "),
        _ => seq.concat(),
    };
    let mut out = String::new();
    for (s, t) in &corpus.pairs {
        out.push_str(&join(s, corpus.source_tokenization));
        out.push('\t');
        out.push_str(&join(t, corpus.target_tokenization));
        out.push('\n');
    }
    write_text(path, &out)
}
