use rand::Rng;

use super::layers::Linear;
use super::mat::Mat;
use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// Scaled dot-product attention with several heads and an output projection.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub head_dim: usize,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    queries_in: Mat,
    memory: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    /// `rows_q x heads x rows_k` attention weights.
    weights: Vec<f64>,
    heads: usize,
    concat: Mat,
}

impl AttentionCache {
    /// Attention distribution of one query row and head over the memory rows.
    pub fn weights(&self, query: usize, head: usize) -> &[f64] {
        let rk = self.k.rows();
        let start = (query * self.heads + head) * rk;
        &self.weights[start..start + rk]
    }
}

impl MultiHeadAttention {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        query_dim: usize,
        memory_dim: usize,
        out_dim: usize,
        heads: usize,
        head_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || head_dim == 0 {
            return Err(Error::Config("attention needs at least one head of positive width".into()));
        }
        let inner = heads * head_dim;
        Ok(Self {
            query: Linear::new(store, &format!("{name}.query"), query_dim, inner, true, rng)?,
            key: Linear::new(store, &format!("{name}.key"), memory_dim, inner, true, rng)?,
            value: Linear::new(store, &format!("{name}.value"), memory_dim, inner, true, rng)?,
            output: Linear::new(store, &format!("{name}.output"), inner, out_dim, true, rng)?,
            heads,
            head_dim,
        })
    }

    pub fn forward(&self, ps: &ParamStore, queries: &Mat, memory: &Mat) -> (Mat, AttentionCache) {
        let (rq, rk, dh) = (queries.rows(), memory.rows(), self.head_dim);
        let q = self.query.forward(ps, queries);
        let k = self.key.forward(ps, memory);
        let v = self.value.forward(ps, memory);
        let scale = 1.0 / (dh as f64).sqrt();
        let mut weights = vec![0.0; rq * self.heads * rk];
        let mut concat = Mat::zeros(rq, self.heads * dh);
        for a in 0..rq {
            for h in 0..self.heads {
                let qa = &q.row(a)[h * dh..(h + 1) * dh];
                let w = &mut weights[(a * self.heads + h) * rk..(a * self.heads + h + 1) * rk];
                let mut max = f64::NEG_INFINITY;
                for b in 0..rk {
                    let kb = &k.row(b)[h * dh..(h + 1) * dh];
                    w[b] = scale * qa.iter().zip(kb).map(|(x, y)| x * y).sum::<f64>();
                    max = max.max(w[b]);
                }
                let mut sum = 0.0;
                for x in w.iter_mut() {
                    *x = (*x - max).exp();
                    sum += *x;
                }
                for x in w.iter_mut() {
                    *x /= sum;
                }
                let out = &mut concat.row_mut(a)[h * dh..(h + 1) * dh];
                for b in 0..rk {
                    let vb = &v.row(b)[h * dh..(h + 1) * dh];
                    for (o, x) in out.iter_mut().zip(vb) {
                        *o += w[b] * x;
                    }
                }
            }
        }
        let y = self.output.forward(ps, &concat);
        (y, AttentionCache {
            queries_in: queries.clone(),
            memory: memory.clone(),
            q,
            k,
            v,
            weights,
            heads: self.heads,
            concat,
        })
    }

    /// Returns gradients for the queries and for the memory rows.
    pub fn backward(&self, ps: &ParamStore, cache: &AttentionCache, dy: &Mat, grads: &mut Gradients) -> (Mat, Mat) {
        let (rq, rk, dh) = (cache.q.rows(), cache.k.rows(), self.head_dim);
        let scale = 1.0 / (dh as f64).sqrt();
        let dconcat = self.output.backward(ps, &cache.concat, dy, grads);
        let mut dq = Mat::zeros(rq, self.heads * dh);
        let mut dk = Mat::zeros(rk, self.heads * dh);
        let mut dv = Mat::zeros(rk, self.heads * dh);
        let mut dw = vec![0.0; rk];
        for a in 0..rq {
            for h in 0..self.heads {
                let w = &cache.weights[(a * self.heads + h) * rk..(a * self.heads + h + 1) * rk];
                let dc = &dconcat.row(a)[h * dh..(h + 1) * dh];
                for b in 0..rk {
                    let vb = &cache.v.row(b)[h * dh..(h + 1) * dh];
                    dw[b] = dc.iter().zip(vb).map(|(x, y)| x * y).sum();
                    for (g, x) in dv.row_mut(b)[h * dh..(h + 1) * dh].iter_mut().zip(dc) {
                        *g += w[b] * x;
                    }
                }
                let inner: f64 = w.iter().zip(&dw).map(|(x, y)| x * y).sum();
                let qa = cache.q.row(a)[h * dh..(h + 1) * dh].to_vec();
                for b in 0..rk {
                    let ds = w[b] * (dw[b] - inner) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let kb = &cache.k.row(b)[h * dh..(h + 1) * dh];
                    for (g, x) in dq.row_mut(a)[h * dh..(h + 1) * dh].iter_mut().zip(kb) {
                        *g += ds * x;
                    }
                    for (g, x) in dk.row_mut(b)[h * dh..(h + 1) * dh].iter_mut().zip(&qa) {
                        *g += ds * x;
                    }
                }
            }
        }
        let dqueries = self.query.backward(ps, &cache.queries_in, &dq, grads);
        let mut dmemory = self.key.backward(ps, &cache.memory, &dk, grads);
        dmemory.add_assign(&self.value.backward(ps, &cache.memory, &dv, grads));
        (dqueries, dmemory)
    }
}
