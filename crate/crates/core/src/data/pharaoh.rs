use std::path::Path;

use crate::error::{Error, Result};

use super::metrics::AlignmentLinkSet;
use super::read_text;

/// Index origin of the positions written in an alignment file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexBase {
    Zero,
    One,
}

/// Parses one `i-j i-j ...` line into 1-based links.
pub fn parse_pharaoh_line(line: &str, base: IndexBase) -> Result<AlignmentLinkSet> {
    let shift = match base {
        IndexBase::Zero => 1,
        IndexBase::One => 0,
    };
    let mut links = Vec::new();
    for tok in line.split_whitespace() {
        let (a, b) = tok.split_once('-').ok_or_else(|| Error::Data(format!("malformed link `{tok}`")))?;
        let i: usize = a.parse().map_err(|_| Error::Data(format!("malformed link `{tok}`")))?;
        let j: usize = b.parse().map_err(|_| Error::Data(format!("malformed link `{tok}`")))?;
        if base == IndexBase::One && (i == 0 || j == 0) {
            return Err(Error::Data(format!("position 0 in 1-based link `{tok}`")));
        }
        links.push((i + shift, j + shift));
    }
    Ok(AlignmentLinkSet::new(links))
}

/// One link set per line.
pub fn read_pharaoh(path: &Path, base: IndexBase) -> Result<Vec<AlignmentLinkSet>> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    text.lines()
        .enumerate()
        .map(|(k, line)| {
            parse_pharaoh_line(line, base).map_err(|e| Error::parse(&name, k + 1, e.to_string()))
        })
        .collect()
}
