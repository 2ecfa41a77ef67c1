//! Binary model files.
//!
//! Layout: the magic `NSED1`, a `u32` manifest length and the UTF-8 manifest of
//! `key=value` lines, then a `u32` tensor count and, per tensor, a `u32` name
//! length, the name, a `u32` rank, `rank` `u32` dimensions and the values as
//! little-endian `f32`. All integers are little-endian. The vocabularies are
//! stored next to the file as `<file>.src.vocab` and `<file>.tgt.vocab`.
//!
//! The manifest key `kind` tells neural models (`neural`) from statistical
//! operation tables (`stat`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::{Tokenization, Vocabulary};
use crate::error::{Error, Result};
use crate::model::NeuralModel;
use crate::stat::OperationTable;
use crate::training::TrainConfig;

pub const MAGIC: &[u8; 5] = b"NSED1";

/// Parameter name of the statistical operation table.
pub const STAT_TABLE: &str = "stat.table";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    Neural,
    Stat,
}

impl CheckpointKind {
    fn as_str(self) -> &'static str {
        match self {
            CheckpointKind::Neural => "neural",
            CheckpointKind::Stat => "stat",
        }
    }
}

/// Reads only the manifest to tell which kind of model a file holds.
pub fn checkpoint_kind(path: &Path) -> Result<CheckpointKind> {
    let (mut manifest, _) = read_container(path)?;
    take_kind(&mut manifest)
}

fn take_kind(manifest: &mut BTreeMap<String, String>) -> Result<CheckpointKind> {
    match manifest.remove("kind").as_deref() {
        Some("neural") => Ok(CheckpointKind::Neural),
        Some("stat") => Ok(CheckpointKind::Stat),
        Some(other) => Err(Error::Checkpoint(format!("unknown model kind `{other}`"))),
        None => Err(Error::Checkpoint("manifest lacks `kind`".into())),
    }
}

struct Tensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f32>,
}

fn write_container(path: &Path, manifest: &[(String, String)], tensors: &[Tensor]) -> Result<()> {
    let text: String = manifest.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, text.len())?;
    buf.extend_from_slice(text.as_bytes());
    put_u32(&mut buf, tensors.len())?;
    for t in tensors {
        put_u32(&mut buf, t.name.len())?;
        buf.extend_from_slice(t.name.as_bytes());
        put_u32(&mut buf, t.shape.len())?;
        for &d in &t.shape {
            put_u32(&mut buf, d)?;
        }
        for v in &t.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

fn read_container(path: &Path) -> Result<(BTreeMap<String, String>, Vec<Tensor>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint(format!("{}: not a model file", path.display())));
    }
    let len = r.u32()?;
    let text =
        std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("manifest is not valid UTF-8".into()))?;
    let mut manifest = BTreeMap::new();
    for line in text.lines() {
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Checkpoint(format!("malformed manifest line `{line}`")))?;
        if manifest.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Checkpoint(format!("manifest repeats `{k}`")));
        }
    }
    let count = r.u32()?;
    let mut tensors: Vec<Tensor> = Vec::new();
    for _ in 0..count {
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not valid UTF-8".into()))?
            .to_string();
        if tensors.iter().any(|t| t.name == name) {
            return Err(Error::Checkpoint(format!("tensor `{name}` appears twice")));
        }
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` is too large")))?;
        let raw = r.take(n)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        tensors.push(Tensor { name, shape, values });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after the last tensor".into()));
    }
    Ok((manifest, tensors))
}

fn take_key(manifest: &mut BTreeMap<String, String>, key: &str) -> Result<String> {
    manifest.remove(key).ok_or_else(|| Error::Checkpoint(format!("manifest lacks `{key}`")))
}

fn load_vocab(manifest: &mut BTreeMap<String, String>, dir: &Path, side: &str) -> Result<Vocabulary> {
    let vocab = Vocabulary::load(&dir.join(take_key(manifest, &format!("{side}_vocab"))?))?;
    let expected: usize = take_key(manifest, &format!("{side}_vocab_size"))?
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad {side} vocabulary size")))?;
    if vocab.len() != expected {
        return Err(Error::Vocabulary(format!(
            "{side} vocabulary has {} symbols, the model expects {expected}",
            vocab.len()
        )));
    }
    Ok(vocab)
}

/// A trained model with everything needed to use it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: NeuralModel,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pub source_tokenization: Tokenization,
    pub target_tokenization: Tokenization,
    /// Log-space decision threshold for matching models.
    pub threshold: Option<f64>,
    /// Validation metric of the saved parameters.
    pub metric: Option<f64>,
}

fn vocab_path(path: &Path, side: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(format!(".{side}.vocab"));
    PathBuf::from(s)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"))
}

impl Checkpoint {
    pub fn manifest(&self, path: &Path) -> Vec<(String, String)> {
        let mut lines = vec![("kind".to_string(), CheckpointKind::Neural.as_str().to_string())];
        lines.extend(self.config.to_lines());
        lines.push(("source_vocab".into(), file_name(&vocab_path(path, "src"))));
        lines.push(("target_vocab".into(), file_name(&vocab_path(path, "tgt"))));
        lines.push(("source_vocab_size".into(), self.source_vocab.len().to_string()));
        lines.push(("target_vocab_size".into(), self.target_vocab.len().to_string()));
        lines.push(("source_tokenization".into(), self.source_tokenization.to_string()));
        lines.push(("target_tokenization".into(), self.target_tokenization.to_string()));
        lines.push(("threshold".into(), opt_f64(self.threshold)));
        lines.push(("metric".into(), opt_f64(self.metric)));
        lines
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let params = &self.model.params;
        let tensors: Vec<Tensor> = params
            .ids()
            .map(|id| Tensor {
                name: params.name(id).to_string(),
                shape: params.shape(id).to_vec(),
                values: params.values(id).to_vec(),
            })
            .collect();
        write_container(path, &self.manifest(path), &tensors)?;
        self.source_vocab.save(&vocab_path(path, "src"))?;
        self.target_vocab.save(&vocab_path(path, "tgt"))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (mut manifest, tensors) = read_container(path)?;
        if take_kind(&mut manifest)? != CheckpointKind::Neural {
            return Err(Error::Checkpoint(format!("{} holds a statistical model", path.display())));
        }
        let dir = path.parent().unwrap_or(Path::new(""));
        let source_vocab = load_vocab(&mut manifest, dir, "source")?;
        let target_vocab = load_vocab(&mut manifest, dir, "target")?;
        let source_tokenization = take_key(&mut manifest, "source_tokenization")?.parse()?;
        let target_tokenization = take_key(&mut manifest, "target_tokenization")?.parse()?;
        let threshold = parse_opt(&take_key(&mut manifest, "threshold")?)?;
        let metric = parse_opt(&take_key(&mut manifest, "metric")?)?;
        let config = TrainConfig::from_map(&manifest)?;

        let spec = config.model_spec(source_vocab.len(), target_vocab.len());
        let mut model = NeuralModel::new(spec, config.seed)?;
        if tensors.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "file has {} tensors, the model has {}",
                tensors.len(),
                model.params.len()
            )));
        }
        for t in &tensors {
            let id = model
                .params
                .by_name(&t.name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor `{}`", t.name)))?;
            if model.params.shape(id) != t.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` has shape {:?}, expected {:?}",
                    t.name,
                    t.shape,
                    model.params.shape(id)
                )));
            }
            model.params.set_values(id, &t.values)?;
        }
        Ok(Checkpoint {
            config,
            model,
            source_vocab,
            target_vocab,
            source_tokenization,
            target_tokenization,
            threshold,
            metric,
        })
    }
}

/// A statistical operation table over one shared vocabulary. Table symbol `k`
/// is vocabulary id `k + RESERVED`.
#[derive(Clone, Debug)]
pub struct StatCheckpoint {
    pub table: OperationTable,
    pub vocab: Vocabulary,
    pub tokenization: Tokenization,
    pub smoothing: f64,
    pub threshold: Option<f64>,
    pub metric: Option<f64>,
}

impl StatCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let symbols = self.vocab.len() - crate::model::RESERVED as usize;
        if self.table.source_size() != symbols || self.table.target_size() != symbols {
            return Err(Error::Vocabulary(format!(
                "table covers {}x{} symbols, the vocabulary has {symbols}",
                self.table.source_size(),
                self.table.target_size()
            )));
        }
        let manifest = vec![
            ("kind".to_string(), CheckpointKind::Stat.as_str().to_string()),
            ("task".into(), "match".into()),
            ("source_vocab".into(), file_name(&vocab_path(path, "src"))),
            ("source_vocab_size".into(), self.vocab.len().to_string()),
            ("source_tokenization".into(), self.tokenization.to_string()),
            ("smoothing".into(), format!("{:?}", self.smoothing)),
            ("threshold".into(), opt_f64(self.threshold)),
            ("metric".into(), opt_f64(self.metric)),
        ];
        let values = self.table.log_probs().iter().map(|&v| v as f32).collect();
        let tensor = Tensor { name: STAT_TABLE.into(), shape: vec![self.table.log_probs().len()], values };
        write_container(path, &manifest, &[tensor])?;
        self.vocab.save(&vocab_path(path, "src"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (mut manifest, tensors) = read_container(path)?;
        if take_kind(&mut manifest)? != CheckpointKind::Stat {
            return Err(Error::Checkpoint(format!("{} holds a neural model", path.display())));
        }
        let dir = path.parent().unwrap_or(Path::new(""));
        let vocab = load_vocab(&mut manifest, dir, "source")?;
        let tokenization = take_key(&mut manifest, "source_tokenization")?.parse()?;
        let smoothing = take_key(&mut manifest, "smoothing")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad smoothing value".into()))?;
        let threshold = parse_opt(&take_key(&mut manifest, "threshold")?)?;
        let metric = parse_opt(&take_key(&mut manifest, "metric")?)?;
        let [tensor] = tensors.as_slice() else {
            return Err(Error::Checkpoint(format!("expected one tensor, found {}", tensors.len())));
        };
        if tensor.name != STAT_TABLE {
            return Err(Error::Checkpoint(format!("unknown tensor `{}`", tensor.name)));
        }
        let symbols = vocab.len() - crate::model::RESERVED as usize;
        let log_probs = tensor.values.iter().map(|&v| v as f64).collect();
        let table = OperationTable::from_log_probs(symbols, symbols, log_probs)
            .map_err(|e| Error::Checkpoint(format!("bad operation table: {e}")))?;
        Ok(StatCheckpoint { table, vocab, tokenization, smoothing, threshold, metric })
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == "none" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Checkpoint(format!("bad number `{s}` in manifest")))
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in 32 bits")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("file is truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}
