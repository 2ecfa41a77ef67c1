use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::vocab::{tokenize, Tokenization};
use super::{read_text, write_text};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordEntry {
    pub language: String,
    pub form: Vec<String>,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub label: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CognateSplits {
    pub train: Vec<LabeledPair>,
    pub valid: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    /// Words and classes left after removing singleton classes.
    pub words: usize,
    pub classes: usize,
}

const LANGUAGE_COLUMNS: [&str; 4] = ["language", "doculect", "lang", "language_id"];
const TOKEN_COLUMNS: [&str; 2] = ["tokens", "segments"];
const FORM_COLUMNS: [&str; 5] = ["ipa", "transcription", "form", "word", "asjp"];
const CLASS_COLUMNS: [&str; 6] = ["cognate_class", "cogid", "cognateset", "cognate_set", "cognate", "class"];

fn find_column(header: &[String], names: &[&str]) -> Option<usize> {
    names.iter().find_map(|n| header.iter().position(|h| h == n))
}

/// Reads a tab-separated word list with a header naming the language, form and
/// cognate-class columns. A `tokens`/`segments` column is split on whitespace;
/// other form columns are split into characters.
pub fn read_wordlist(path: &Path) -> Result<Vec<WordEntry>> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines.next().ok_or_else(|| Error::Empty(format!("{name} has no header")))?;
    let header: Vec<String> = header_line.split('\t').map(|h| h.trim().to_lowercase()).collect();
    let lang = find_column(&header, &LANGUAGE_COLUMNS)
        .ok_or_else(|| Error::parse(&name, 1, "no language column in the header"))?;
    let class = find_column(&header, &CLASS_COLUMNS)
        .ok_or_else(|| Error::parse(&name, 1, "no cognate-class column in the header"))?;
    let (form, tok) = match find_column(&header, &TOKEN_COLUMNS) {
        Some(c) => (c, Tokenization::Whitespace),
        None => (
            find_column(&header, &FORM_COLUMNS).ok_or_else(|| Error::parse(&name, 1, "no form column in the header"))?,
            Tokenization::Chars,
        ),
    };
    let needed = lang.max(class).max(form) + 1;
    let mut out = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < needed {
            return Err(Error::parse(&name, lineno + 1, format!("expected at least {needed} fields")));
        }
        let raw_form = fields[form].trim();
        let class_label = fields[class].trim();
        if raw_form.is_empty() || class_label.is_empty() {
            continue;
        }
        let form_tokens: Vec<String> = match tok {
            Tokenization::Chars => raw_form.chars().map(|c| if c.is_whitespace() { "_".into() } else { c.to_string() }).collect(),
            Tokenization::Whitespace => tokenize(raw_form, tok),
        };
        out.push(WordEntry { language: fields[lang].trim().to_string(), form: form_tokens, class: class_label.to_string() });
    }
    Ok(out)
}

/// Positive pairs of same-class words, `negatives_per_positive` negatives per
/// positive drawn uniformly from words of other classes, shuffled and split at
/// the pair level.
pub fn build_cognate_pairs(
    words: &[WordEntry],
    negatives_per_positive: usize,
    seed: u64,
    valid_size: usize,
    test_size: usize,
) -> Result<CognateSplits> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, w) in words.iter().enumerate() {
        by_class.entry(w.class.as_str()).or_default().push(k);
    }
    by_class.retain(|_, members| members.len() >= 2);
    let kept: Vec<usize> = {
        let mut v: Vec<usize> = by_class.values().flatten().copied().collect();
        v.sort_unstable();
        v
    };
    if by_class.len() < 2 {
        return Err(Error::Data("need at least two cognate classes with two or more members".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::new();
    let mut seen_negatives: HashSet<(usize, usize)> = HashSet::new();
    let max_attempts = 1000 * negatives_per_positive.max(1);
    for members in by_class.values() {
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let (wa, wb) = (members[a], members[b]);
                examples.push(LabeledPair {
                    source: words[wa].form.clone(),
                    target: words[wb].form.clone(),
                    label: true,
                });
                let mut drawn = 0;
                let mut attempts = 0;
                while drawn < negatives_per_positive && attempts < max_attempts {
                    attempts += 1;
                    let c = kept[rng.random_range(0..kept.len())];
                    if words[c].class == words[wa].class || !seen_negatives.insert((wa, c)) {
                        continue;
                    }
                    examples.push(LabeledPair {
                        source: words[wa].form.clone(),
                        target: words[c].form.clone(),
                        label: false,
                    });
                    drawn += 1;
                }
            }
        }
    }
    if examples.len() <= valid_size + test_size {
        return Err(Error::Data(format!(
            "{} examples cannot fill validation ({valid_size}) and test ({test_size}) splits",
            examples.len()
        )));
    }
    examples.shuffle(&mut rng);
    let test = examples.split_off(examples.len() - test_size);
    let valid = examples.split_off(examples.len() - valid_size);
    Ok(CognateSplits { train: examples, valid, test, words: kept.len(), classes: by_class.len() })
}

/// Reads a word list and builds the labelled splits.
pub fn load_cognates(
    path: &Path,
    negatives_per_positive: usize,
    seed: u64,
    valid_size: usize,
    test_size: usize,
) -> Result<CognateSplits> {
    build_cognate_pairs(&read_wordlist(path)?, negatives_per_positive, seed, valid_size, test_size)
}

/// Writes `source<TAB>target<TAB>label` lines with space-separated symbols.
pub fn write_match_split(path: &Path, pairs: &[LabeledPair]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.source.join(" "));
        out.push('\t');
        out.push_str(&p.target.join(" "));
        out.push('\t');
        out.push(if p.label { '1' } else { '0' });
        out.push('\n');
    }
    write_text(path, &out)
}

/// Reads labelled pairs. A third column of `1`/`0` gives the label; two-column
/// lines are unlabelled and read as negatives.
pub fn read_match_split(path: &Path, tok: Tokenization) -> Result<Vec<LabeledPair>> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let label = match fields.len() {
            2 => false,
            3 => match fields[2].trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(Error::parse(&name, lineno + 1, format!("invalid label `{other}`"))),
            },
            n => return Err(Error::parse(&name, lineno + 1, format!("expected 2 or 3 tab-separated fields, got {n}"))),
        };
        let source = tokenize(fields[0].trim(), tok);
        let target = tokenize(fields[1].trim(), tok);
        if source.is_empty() || target.is_empty() {
            return Err(Error::parse(&name, lineno + 1, "empty string"));
        }
        out.push(LabeledPair { source, target, label });
    }
    Ok(out)
}
