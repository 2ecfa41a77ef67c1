use rand::Rng;

use super::linalg::{add_matmul, add_matmul_at, matmul_bt};
use super::mat::Mat;
use super::params::{Gradients, Init, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Affine map `y = W x + b` applied to every row.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let weight = store.add(&format!("{name}.weight"), &[out_dim, in_dim], Init::Uniform(bound), rng)?;
        let bias = if bias { Some(store.add(&format!("{name}.bias"), &[out_dim], Init::Zeros, rng)?) } else { None };
        Ok(Self { weight, bias, in_dim, out_dim })
    }

    pub fn forward(&self, ps: &ParamStore, x: &Mat) -> Mat {
        assert_eq!(x.cols(), self.in_dim, "linear layer input width");
        let mut y = matmul_bt(x, ps.get(self.weight), self.out_dim);
        if let Some(b) = self.bias {
            let b = ps.get(b);
            for r in 0..y.rows() {
                for (v, bb) in y.row_mut(r).iter_mut().zip(b) {
                    *v += bb;
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients only.
    pub fn backward_params(&self, x: &Mat, dy: &Mat, grads: &mut Gradients) {
        add_matmul_at(grads.get_mut(self.weight), dy, x);
        if let Some(b) = self.bias {
            let db = grads.get_mut(b);
            for r in 0..dy.rows() {
                for (g, d) in db.iter_mut().zip(dy.row(r)) {
                    *g += d;
                }
            }
        }
    }

    pub fn backward(&self, ps: &ParamStore, x: &Mat, dy: &Mat, grads: &mut Gradients) -> Mat {
        self.backward_params(x, dy, grads);
        let mut dx = Mat::zeros(dy.rows(), self.in_dim);
        add_matmul(&mut dx, dy, ps.get(self.weight));
        dx
    }
}

pub fn relu_in_place(x: &mut Mat) {
    x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes gradient entries where the pre-activation was not positive.
pub fn relu_backward_in_place(d: &mut Mat, pre: &Mat) {
    for (g, &p) in d.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Per-row layer normalisation with learned gain and bias.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub dim: usize,
    pub eps: f64,
}

#[derive(Clone, Debug)]
pub struct LnCache {
    pub xhat: Mat,
    pub inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Result<Self> {
        let gain = store.add(&format!("{name}.gain"), &[dim], Init::Ones, rng)?;
        let bias = store.add(&format!("{name}.bias"), &[dim], Init::Zeros, rng)?;
        Ok(Self { gain, bias, dim, eps: 1e-5 })
    }

    pub fn forward(&self, ps: &ParamStore, x: &Mat) -> (Mat, LnCache) {
        assert_eq!(x.cols(), self.dim, "layer norm input width");
        let (g, b) = (ps.get(self.gain), ps.get(self.bias));
        let mut y = Mat::zeros(x.rows(), self.dim);
        let mut xhat = Mat::zeros(x.rows(), self.dim);
        let mut inv_std = Vec::with_capacity(x.rows());
        let d = self.dim as f64;
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std.push(is);
            let xh = xhat.row_mut(r);
            for c in 0..self.dim {
                xh[c] = (row[c] - mean) * is;
            }
            let yr = y.row_mut(r);
            for c in 0..self.dim {
                yr[c] = xhat.get(r, c) * g[c] + b[c];
            }
        }
        (y, LnCache { xhat, inv_std })
    }

    pub fn backward(&self, ps: &ParamStore, cache: &LnCache, dy: &Mat, grads: &mut Gradients) -> Mat {
        let g = ps.get(self.gain);
        let d = self.dim as f64;
        {
            let dg = grads.get_mut(self.gain);
            for r in 0..dy.rows() {
                for c in 0..self.dim {
                    dg[c] += dy.get(r, c) * cache.xhat.get(r, c);
                }
            }
        }
        {
            let db = grads.get_mut(self.bias);
            for r in 0..dy.rows() {
                for (acc, v) in db.iter_mut().zip(dy.row(r)) {
                    *acc += v;
                }
            }
        }
        let mut dx = Mat::zeros(dy.rows(), self.dim);
        let mut dxhat = vec![0.0; self.dim];
        for r in 0..dy.rows() {
            let xh = cache.xhat.row(r);
            let dyr = dy.row(r);
            for c in 0..self.dim {
                dxhat[c] = dyr[c] * g[c];
            }
            let mean_d = dxhat.iter().sum::<f64>() / d;
            let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d;
            let is = cache.inv_std[r];
            let out = dx.row_mut(r);
            for c in 0..self.dim {
                out[c] = is * (dxhat[c] - mean_d - xh[c] * mean_dx);
            }
        }
        dx
    }
}

/// Lookup table mapping symbol ids to vectors.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, vocab: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let table = store.add(name, &[vocab, dim], Init::Normal(0.02), rng)?;
        Ok(Self { table, vocab, dim })
    }

    pub fn forward(&self, ps: &ParamStore, ids: &[u32]) -> Result<Mat> {
        let t = ps.get(self.table);
        let mut out = Mat::zeros(ids.len(), self.dim);
        for (r, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= self.vocab {
                return Err(Error::Vocabulary(format!("symbol id {id} outside a vocabulary of {}", self.vocab)));
            }
            out.row_mut(r).copy_from_slice(&t[id * self.dim..(id + 1) * self.dim]);
        }
        Ok(out)
    }

    pub fn backward(&self, ids: &[u32], dy: &Mat, grads: &mut Gradients) {
        let g = grads.get_mut(self.table);
        for (r, &id) in ids.iter().enumerate() {
            let id = id as usize;
            for (acc, v) in g[id * self.dim..(id + 1) * self.dim].iter_mut().zip(dy.row(r)) {
                *acc += v;
            }
        }
    }
}
