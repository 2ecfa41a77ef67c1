use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::conv::Conv1d;
use super::gru::{GruCache, GruCell};
use super::layers::{relu_backward_in_place, relu_in_place, Embedding, LayerNorm, LnCache};
use super::mat::Mat;
use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    /// Symbol embedding plus learned position embedding.
    Unigram,
    /// Convolution with residual connection and layer normalisation.
    Cnn,
    /// Gated recurrent layers with residual connections and layer normalisation.
    Rnn,
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unigram" => Ok(EncoderKind::Unigram),
            "cnn" => Ok(EncoderKind::Cnn),
            "rnn" => Ok(EncoderKind::Rnn),
            other => Err(Error::Config(format!("unknown encoder `{other}` (expected unigram, cnn or rnn)"))),
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::Unigram => "unigram",
            EncoderKind::Cnn => "cnn",
            EncoderKind::Rnn => "rnn",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub kernel_width: usize,
    pub max_positions: usize,
    /// Position `r` may only depend on positions `<= r`.
    pub causal: bool,
}

#[derive(Clone, Debug)]
enum Layer {
    Conv { conv: Conv1d, norm: LayerNorm },
    Rnn { fwd: GruCell, bwd: Option<GruCell>, norm: LayerNorm, residual: bool },
}

#[derive(Clone, Debug)]
enum LayerCache {
    Conv { windows: Mat, pre: Mat, ln: LnCache },
    Rnn { fwd: GruCache, bwd: Option<GruCache>, ln: LnCache },
}

#[derive(Clone, Debug)]
pub struct EncoderCache {
    ids: Vec<u32>,
    layers: Vec<LayerCache>,
}

/// Maps a symbol sequence to one vector per position.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub spec: EncoderSpec,
    embed: Embedding,
    positions: Option<Embedding>,
    layers: Vec<Layer>,
    out_dim: usize,
}

impl Encoder {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, spec: EncoderSpec, rng: &mut R) -> Result<Self> {
        if spec.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be positive".into()));
        }
        let embed = Embedding::new(store, &format!("{name}.embed"), spec.vocab, spec.embed_dim, rng)?;
        let positions = match spec.kind {
            EncoderKind::Unigram | EncoderKind::Cnn => Some(Embedding::new(
                store,
                &format!("{name}.position"),
                spec.max_positions,
                spec.embed_dim,
                rng,
            )?),
            EncoderKind::Rnn => None,
        };
        let mut layers = Vec::new();
        let mut width = spec.embed_dim;
        match spec.kind {
            EncoderKind::Unigram => {}
            EncoderKind::Cnn => {
                for l in 0..spec.layers {
                    let conv = Conv1d::new(
                        store,
                        &format!("{name}.cnn.{l}.conv"),
                        width,
                        width,
                        spec.kernel_width,
                        spec.causal,
                        rng,
                    )?;
                    let norm = LayerNorm::new(store, &format!("{name}.cnn.{l}.norm"), width, rng)?;
                    layers.push(Layer::Conv { conv, norm });
                }
            }
            EncoderKind::Rnn => {
                let h = spec.hidden_dim;
                if h == 0 || (!spec.causal && h % 2 != 0) {
                    return Err(Error::Config(format!(
                        "hidden_dim must be positive and even for a bidirectional encoder, got {h}"
                    )));
                }
                for l in 0..spec.layers {
                    let (fwd, bwd) = if spec.causal {
                        (GruCell::new(store, &format!("{name}.rnn.{l}.fwd"), width, h, rng)?, None)
                    } else {
                        (
                            GruCell::new(store, &format!("{name}.rnn.{l}.fwd"), width, h / 2, rng)?,
                            Some(GruCell::new(store, &format!("{name}.rnn.{l}.bwd"), width, h / 2, rng)?),
                        )
                    };
                    let norm = LayerNorm::new(store, &format!("{name}.rnn.{l}.norm"), h, rng)?;
                    layers.push(Layer::Rnn { fwd, bwd, norm, residual: width == h });
                    width = h;
                }
            }
        }
        Ok(Self { spec, embed, positions, layers, out_dim: width })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, ps: &ParamStore, ids: &[u32]) -> Result<(Mat, EncoderCache)> {
        if ids.len() > self.spec.max_positions {
            return Err(Error::Length { len: ids.len(), max: self.spec.max_positions });
        }
        let mut x = self.embed.forward(ps, ids)?;
        if let Some(pos) = &self.positions {
            let idx: Vec<u32> = (0..ids.len() as u32).collect();
            x.add_assign(&pos.forward(ps, &idx)?);
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            match layer {
                Layer::Conv { conv, norm } => {
                    let (pre, windows) = conv.forward(ps, &x);
                    let mut sum = pre.clone();
                    relu_in_place(&mut sum);
                    sum.add_assign(&x);
                    let (y, ln) = norm.forward(ps, &sum);
                    caches.push(LayerCache::Conv { windows, pre, ln });
                    x = y;
                }
                Layer::Rnn { fwd, bwd, norm, residual } => {
                    let fc = fwd.forward(ps, &x);
                    let bc = bwd.as_ref().map(|b| b.forward(ps, &x.reversed_rows()));
                    let mut out = concat_directions(&fc.outputs(), bc.as_ref().map(|c| c.outputs().reversed_rows()));
                    if *residual {
                        out.add_assign(&x);
                    }
                    let (y, ln) = norm.forward(ps, &out);
                    caches.push(LayerCache::Rnn { fwd: fc, bwd: bc, ln });
                    x = y;
                }
            }
        }
        Ok((x, EncoderCache { ids: ids.to_vec(), layers: caches }))
    }

    pub fn backward(&self, ps: &ParamStore, cache: &EncoderCache, dy: &Mat, grads: &mut Gradients) {
        let mut d = dy.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            match (layer, lc) {
                (Layer::Conv { conv, norm }, LayerCache::Conv { windows, pre, ln }) => {
                    let ds = norm.backward(ps, ln, &d, grads);
                    let mut dpre = ds.clone();
                    relu_backward_in_place(&mut dpre, pre);
                    let mut dx = conv.backward(ps, windows, &dpre, grads);
                    dx.add_assign(&ds);
                    d = dx;
                }
                (Layer::Rnn { fwd, bwd, norm, residual }, LayerCache::Rnn { fwd: fc, bwd: bc, ln }) => {
                    let ds = norm.backward(ps, ln, &d, grads);
                    let half = fwd.hidden;
                    let (dfwd, dbwd) = split_directions(&ds, half);
                    let mut dx = fwd.backward(ps, fc, &dfwd, grads);
                    if let (Some(b), Some(c), Some(db)) = (bwd, bc, dbwd) {
                        let dxb = b.backward(ps, c, &db.reversed_rows(), grads);
                        dx.add_assign(&dxb.reversed_rows());
                    }
                    if *residual {
                        dx.add_assign(&ds);
                    }
                    d = dx;
                }
                _ => unreachable!("layer and cache kinds always agree"),
            }
        }
        self.embed.backward(&cache.ids, &d, grads);
        if let Some(pos) = &self.positions {
            let idx: Vec<u32> = (0..cache.ids.len() as u32).collect();
            pos.backward(&idx, &d, grads);
        }
    }
}

fn concat_directions(fwd: &Mat, bwd: Option<Mat>) -> Mat {
    match bwd {
        None => fwd.clone(),
        Some(b) => {
            let (rows, h) = (fwd.rows(), fwd.cols());
            let mut out = Mat::zeros(rows, 2 * h);
            for r in 0..rows {
                out.row_mut(r)[..h].copy_from_slice(fwd.row(r));
                out.row_mut(r)[h..].copy_from_slice(b.row(r));
            }
            out
        }
    }
}

fn split_directions(d: &Mat, half: usize) -> (Mat, Option<Mat>) {
    if d.cols() == half {
        return (d.clone(), None);
    }
    let rows = d.rows();
    let mut a = Mat::zeros(rows, half);
    let mut b = Mat::zeros(rows, half);
    for r in 0..rows {
        a.row_mut(r).copy_from_slice(&d.row(r)[..half]);
        b.row_mut(r).copy_from_slice(&d.row(r)[half..]);
    }
    (a, Some(b))
}
