use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::RESERVED;

use super::{read_text, write_text};

pub const BOS_SYMBOL: &str = "<s>";
pub const EOS_SYMBOL: &str = "</s>";

/// How a text field is split into symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tokenization {
    /// One symbol per Unicode scalar value.
    Chars,
    /// Whitespace-separated tokens.
    Whitespace,
}

impl FromStr for Tokenization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chars" => Ok(Tokenization::Chars),
            "space" | "whitespace" => Ok(Tokenization::Whitespace),
            other => Err(Error::Config(format!("unknown tokenization `{other}` (expected chars or space)"))),
        }
    }
}

impl std::fmt::Display for Tokenization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tokenization::Chars => "chars",
            Tokenization::Whitespace => "space",
        })
    }
}

pub fn tokenize(text: &str, tok: Tokenization) -> Vec<String> {
    match tok {
        Tokenization::Chars => text.chars().map(|c| c.to_string()).collect(),
        Tokenization::Whitespace => text.split_whitespace().map(str::to_string).collect(),
    }
}

/// Bijection between symbols and ids, with the sentinel at 0 and the end marker at 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Self { symbols: Vec::new(), index: HashMap::new() };
        v.push(BOS_SYMBOL);
        v.push(EOS_SYMBOL);
        v
    }

    fn push(&mut self, s: &str) -> u32 {
        let id = self.symbols.len() as u32;
        self.symbols.push(s.to_string());
        self.index.insert(s.to_string(), id);
        id
    }

    /// Vocabulary of every symbol in the sequences, in sorted order.
    pub fn build<'a, I, S>(sequences: I) -> Self
    where
        I: IntoIterator<Item = &'a S>,
        S: AsRef<[String]> + 'a + ?Sized,
    {
        let mut set = BTreeSet::new();
        for seq in sequences {
            for s in seq.as_ref() {
                set.insert(s.clone());
            }
        }
        let mut v = Self::new();
        for s in set {
            if !v.index.contains_key(&s) {
                v.push(&s);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= RESERVED as usize
    }

    pub fn id(&self, symbol: &str) -> Option<u32> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: u32) -> &str {
        &self.symbols[id as usize]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Ids of regular symbols; unknown or reserved symbols are an error.
    pub fn encode(&self, seq: &[String]) -> Result<Vec<u32>> {
        seq.iter()
            .map(|s| match self.id(s) {
                Some(id) if id >= RESERVED => Ok(id),
                _ => Err(Error::Vocabulary(format!("symbol `{s}` is not in the vocabulary"))),
            })
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.symbol(i).to_string()).collect()
    }

    /// One symbol per line, in id order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.symbols {
            out.push_str(s);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut v = Self { symbols: Vec::new(), index: HashMap::new() };
        for line in text.split_terminator('\n') {
            if v.index.contains_key(line) {
                return Err(Error::Vocabulary(format!("duplicate vocabulary entry `{line}`")));
            }
            v.push(line);
        }
        if v.symbols.len() < RESERVED as usize || v.symbols[0] != BOS_SYMBOL || v.symbols[1] != EOS_SYMBOL {
            return Err(Error::Vocabulary("vocabulary must start with the reserved symbols".into()));
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }
}
