//! Dataset loading, vocabularies and evaluation metrics.

mod cognates;
mod dataset;
mod metrics;
mod pharaoh;
mod transduction;
mod vocab;

pub use cognates::{
    build_cognate_pairs, load_cognates, read_match_split, read_wordlist, write_match_split, CognateSplits,
    LabeledPair, WordEntry,
};
pub use dataset::{
    encode_items, encode_match, encode_pairs, load_match_dir, load_transduction_dir, match_vocabulary,
    symbol_indices, transduction_vocabularies, MatchSplits, TransductionSplits,
};
pub use metrics::{
    alignment_f1, best_reference, binary_f1, cer, corpus_cer, levenshtein, wer, AlignmentLinkSet, LinkCounts,
};
pub use pharaoh::{parse_pharaoh_line, read_pharaoh, IndexBase};
pub use transduction::{
    load_transduction, split_transduction, write_transduction_tsv, TransductionCorpus, TransductionFormat,
};
pub use vocab::{tokenize, Tokenization, Vocabulary};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
