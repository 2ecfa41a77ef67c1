//! Neural operation model: encoders, pair contexts and the operation head.
//!
//! Both strings start with a beginning-of-sequence sentinel, so encoder row `r`
//! holds symbol `r` (1-based) and row 0 holds the sentinel. The pair context of
//! cell `(i, j)` combines source row `i` and target row `j`.
//!
//! For matching, every class of cell `(i, j)` is read from the context of that
//! cell, so each operation sees the symbols it consumes. For transduction the
//! target symbol of an insertion or substitution into `(i, j)` is the one being
//! predicted, so those classes are read from the context of `(i, j - 1)`; the
//! deletion class still comes from `(i, j)`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dp::{log_softmax_in_place, CellGradient, ClassLayout, ClassSelector, OpDistributionGrid};
use crate::error::{Error, Result};
use crate::nn::{
    relu_backward_in_place, AttentionCache, Encoder, EncoderCache, EncoderKind, EncoderSpec, Gradients, LayerNorm,
    Linear, LnCache, Mat, MultiHeadAttention, ParamStore,
};

/// Reserved vocabulary ids.
pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
/// Number of reserved ids; regular symbols start here.
pub const RESERVED: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Match,
    Transduce,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "match" | "matching" | "classify" => Ok(Task::Match),
            "transduce" | "transduction" => Ok(Task::Transduce),
            other => Err(Error::Config(format!("unknown task `{other}` (expected match or transduce)"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Match => "match",
            Task::Transduce => "transduce",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub task: Task,
    pub encoder: EncoderKind,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub kernel_width: usize,
    pub max_positions: usize,
    /// Source vocabulary size including reserved ids. Matching shares it with the target.
    pub source_vocab: usize,
    pub target_vocab: usize,
}

impl ModelSpec {
    /// Number of target classes for transduction: every target id except the sentinel.
    pub fn target_classes(&self) -> usize {
        self.target_vocab - 1
    }

    pub fn layout(&self) -> ClassLayout {
        match self.task {
            Task::Match => ClassLayout::matching(),
            Task::Transduce => ClassLayout::target_typed(self.target_classes()),
        }
    }
}

/// Everything computed for one string pair that the backward pass needs.
#[derive(Clone, Debug)]
pub struct PairForward {
    src_ids: Vec<u32>,
    tgt_ids: Vec<u32>,
    hs: Mat,
    hs_cache: EncoderCache,
    ht: Mat,
    ht_cache: EncoderCache,
    pre: Mat,
    att: Option<(Mat, AttentionCache)>,
    ctx: Mat,
    ln: LnCache,
    /// Head outputs, one row per context cell.
    pub head_out: Mat,
    pub grid: OpDistributionGrid,
}

impl PairForward {
    pub fn rows(&self) -> usize {
        self.src_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.tgt_ids.len()
    }
}

#[derive(Clone, Debug)]
pub struct NeuralModel {
    pub spec: ModelSpec,
    pub params: ParamStore,
    src_enc: Encoder,
    tgt_enc: Encoder,
    proj_src: Linear,
    proj_tgt: Linear,
    attention: Option<MultiHeadAttention>,
    ctx_norm: LayerNorm,
    head: Linear,
}

impl NeuralModel {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        if spec.source_vocab <= RESERVED as usize || spec.target_vocab <= RESERVED as usize {
            return Err(Error::Vocabulary("vocabularies need at least one regular symbol".into()));
        }
        if spec.task == Task::Match && spec.source_vocab != spec.target_vocab {
            return Err(Error::Vocabulary("matching uses one shared vocabulary".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let enc_spec = |vocab, causal| EncoderSpec {
            kind: spec.encoder,
            vocab,
            embed_dim: spec.embed_dim,
            hidden_dim: spec.hidden_dim,
            layers: spec.layers,
            kernel_width: spec.kernel_width,
            max_positions: spec.max_positions,
            causal,
        };
        let src_enc = Encoder::new(&mut params, "enc.src", enc_spec(spec.source_vocab, false), &mut rng)?;
        let tgt_enc = match spec.task {
            Task::Match => src_enc.clone(),
            Task::Transduce => Encoder::new(&mut params, "enc.tgt", enc_spec(spec.target_vocab, true), &mut rng)?,
        };
        let d = spec.embed_dim;
        let proj_src = Linear::new(&mut params, "ctx.proj.src", src_enc.out_dim(), d, false, &mut rng)?;
        let proj_tgt = Linear::new(&mut params, "ctx.proj.tgt", tgt_enc.out_dim(), d, true, &mut rng)?;
        let (attention, ctx_dim) = match spec.task {
            Task::Match => (None, d),
            Task::Transduce => {
                if spec.heads == 0 || d % spec.heads != 0 {
                    return Err(Error::Config(format!(
                        "embed_dim {d} must be divisible by the number of heads {}",
                        spec.heads
                    )));
                }
                let att = MultiHeadAttention::new(
                    &mut params,
                    "ctx.attention",
                    tgt_enc.out_dim(),
                    src_enc.out_dim(),
                    d,
                    spec.heads,
                    d / spec.heads,
                    &mut rng,
                )?;
                (Some(att), 2 * d)
            }
        };
        let ctx_norm = LayerNorm::new(&mut params, "ctx.norm", ctx_dim, &mut rng)?;
        let head = Linear::new(&mut params, "head", ctx_dim, spec.layout().total(), true, &mut rng)?;
        Ok(Self { spec, params, src_enc, tgt_enc, proj_src, proj_tgt, attention, ctx_norm, head })
    }

    pub fn num_classes(&self) -> usize {
        self.spec.layout().total()
    }

    /// Head bias values, used where a class has no context cell.
    fn head_bias(&self) -> &[f64] {
        self.params.get(self.head.bias.expect("head has a bias"))
    }

    /// Pair contexts for all source rows against the given target rows.
    fn contexts(&self, a: &Mat, ht: &Mat, hs: &Mat) -> (Mat, Option<(Mat, AttentionCache)>, Mat, LnCache) {
        let ps = &self.params;
        let b = self.proj_tgt.forward(ps, ht);
        let (rows, cols, d) = (a.rows(), ht.rows(), self.spec.embed_dim);
        let att = self.attention.as_ref().map(|att| att.forward(ps, ht, hs));
        let width = self.ctx_norm.dim;
        let mut pre = Mat::zeros(rows * cols, d);
        let mut x = Mat::zeros(rows * cols, width);
        for i in 0..rows {
            for j in 0..cols {
                let r = i * cols + j;
                let p = pre.row_mut(r);
                for ((v, ai), bj) in p.iter_mut().zip(a.row(i)).zip(b.row(j)) {
                    *v = ai + bj;
                }
                let xr = x.row_mut(r);
                for (o, v) in xr[..d].iter_mut().zip(pre.row(r)) {
                    *o = v.max(0.0);
                }
                if let Some((att_out, _)) = &att {
                    xr[d..].copy_from_slice(att_out.row(j));
                }
            }
        }
        let (ctx, ln) = self.ctx_norm.forward(ps, &x);
        (pre, att, ctx, ln)
    }

    fn check_ids(&self, src_ids: &[u32], tgt_ids: &[u32]) -> Result<()> {
        if src_ids.first() != Some(&BOS) || tgt_ids.first() != Some(&BOS) {
            return Err(Error::Data("both sequences must start with the sentinel".into()));
        }
        if src_ids[1..].iter().any(|&s| s < RESERVED) {
            return Err(Error::Data("reserved id inside a source sequence".into()));
        }
        match self.spec.task {
            Task::Match => {
                if tgt_ids[1..].iter().any(|&s| s < RESERVED) {
                    return Err(Error::Data("reserved id inside a target sequence".into()));
                }
            }
            Task::Transduce => {
                if tgt_ids[1..].iter().any(|&s| s == BOS) {
                    return Err(Error::Data("sentinel inside a target sequence".into()));
                }
            }
        }
        Ok(())
    }

    /// Runs the network on sentinel-prefixed id sequences and builds the operation grid.
    pub fn forward_pair(&self, src_ids: &[u32], tgt_ids: &[u32]) -> Result<PairForward> {
        self.check_ids(src_ids, tgt_ids)?;
        let ps = &self.params;
        let (hs, hs_cache) = self.src_enc.forward(ps, src_ids)?;
        let (ht, ht_cache) = self.tgt_enc.forward(ps, tgt_ids)?;
        let a = self.proj_src.forward(ps, &hs);
        let (pre, att, ctx, ln) = self.contexts(&a, &ht, &hs);
        let head_out = self.head.forward(ps, &ctx);
        let grid = self.assemble_grid(&head_out, src_ids.len(), tgt_ids)?;
        Ok(PairForward {
            src_ids: src_ids.to_vec(),
            tgt_ids: tgt_ids.to_vec(),
            hs,
            hs_cache,
            ht,
            ht_cache,
            pre,
            att,
            ctx,
            ln,
            head_out,
            grid,
        })
    }

    /// Logits of cell `(i, j)` gathered from the head outputs.
    fn cell_logits(&self, head_out: &Mat, cols: usize, i: usize, j: usize, out: &mut [f64]) {
        match self.spec.task {
            Task::Match => out.copy_from_slice(head_out.row(i * cols + j)),
            Task::Transduce => {
                out[0] = head_out.row(i * cols + j)[0];
                let src = if j > 0 { head_out.row(i * cols + j - 1) } else { self.head_bias() };
                out[1..].copy_from_slice(&src[1..]);
            }
        }
    }

    fn assemble_grid(&self, head_out: &Mat, rows: usize, tgt_ids: &[u32]) -> Result<OpDistributionGrid> {
        let cols = tgt_ids.len();
        let k = self.num_classes();
        let mut log_probs = vec![0.0; rows * cols * k];
        for i in 0..rows {
            for j in 0..cols {
                let cell = &mut log_probs[(i * cols + j) * k..(i * cols + j + 1) * k];
                self.cell_logits(head_out, cols, i, j, cell);
                log_softmax_in_place(cell);
            }
        }
        let (selector, target_classes) = match self.spec.task {
            Task::Match => (ClassSelector::Typeless, Vec::new()),
            Task::Transduce => {
                (ClassSelector::TargetTyped, tgt_ids[1..].iter().map(|&t| (t - 1) as usize).collect())
            }
        };
        OpDistributionGrid::new(rows, cols, self.spec.layout(), selector, target_classes, log_probs)
    }

    /// Back-propagates gradients with respect to grid log-probabilities, plus
    /// optional direct gradients with respect to head outputs.
    pub fn backward_pair(
        &self,
        fwd: &PairForward,
        d_log_probs: &CellGradient,
        d_head_out: Option<&Mat>,
        grads: &mut Gradients,
    ) {
        let ps = &self.params;
        let (rows, cols, k) = (fwd.rows(), fwd.cols(), self.num_classes());
        let mut du = match d_head_out {
            Some(d) => d.clone(),
            None => Mat::zeros(rows * cols, k),
        };
        let mut d_bias_boundary = vec![0.0; k];
        let mut dlogit = vec![0.0; k];
        for i in 0..rows {
            for j in 0..cols {
                let g = d_log_probs.cell(i, j);
                let sum: f64 = g.iter().sum();
                if sum == 0.0 && g.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let lp = fwd.grid.cell(i, j);
                for c in 0..k {
                    dlogit[c] = g[c] - lp[c].exp() * sum;
                }
                match self.spec.task {
                    Task::Match => {
                        for (acc, v) in du.row_mut(i * cols + j).iter_mut().zip(&dlogit) {
                            *acc += v;
                        }
                    }
                    Task::Transduce => {
                        du.row_mut(i * cols + j)[0] += dlogit[0];
                        let dst: &mut [f64] =
                            if j > 0 { du.row_mut(i * cols + j - 1) } else { &mut d_bias_boundary };
                        for (acc, v) in dst[1..].iter_mut().zip(&dlogit[1..]) {
                            *acc += v;
                        }
                    }
                }
            }
        }
        if let Some(b) = self.head.bias {
            for (acc, v) in grads.get_mut(b).iter_mut().zip(&d_bias_boundary) {
                *acc += v;
            }
        }
        let dctx = self.head.backward(ps, &fwd.ctx, &du, grads);
        let dx = self.ctx_norm.backward(ps, &fwd.ln, &dctx, grads);
        let d = self.spec.embed_dim;
        let mut dpre = Mat::zeros(rows * cols, d);
        for r in 0..rows * cols {
            dpre.row_mut(r).copy_from_slice(&dx.row(r)[..d]);
        }
        relu_backward_in_place(&mut dpre, &fwd.pre);
        let mut dhs = Mat::zeros(fwd.hs.rows(), fwd.hs.cols());
        let mut dht = Mat::zeros(fwd.ht.rows(), fwd.ht.cols());
        if let (Some(att), Some((_, cache))) = (&self.attention, &fwd.att) {
            let mut datt = Mat::zeros(cols, d);
            for i in 0..rows {
                for j in 0..cols {
                    for (acc, v) in datt.row_mut(j).iter_mut().zip(&dx.row(i * cols + j)[d..]) {
                        *acc += v;
                    }
                }
            }
            let (dq, dm) = att.backward(ps, cache, &datt, grads);
            dht.add_assign(&dq);
            dhs.add_assign(&dm);
        }
        let mut da = Mat::zeros(rows, d);
        let mut db = Mat::zeros(cols, d);
        for i in 0..rows {
            for j in 0..cols {
                let g = dpre.row(i * cols + j);
                for (acc, v) in da.row_mut(i).iter_mut().zip(g) {
                    *acc += v;
                }
                for (acc, v) in db.row_mut(j).iter_mut().zip(g) {
                    *acc += v;
                }
            }
        }
        dhs.add_assign(&self.proj_src.backward(ps, &fwd.hs, &da, grads));
        dht.add_assign(&self.proj_tgt.backward(ps, &fwd.ht, &db, grads));
        self.src_enc.backward(ps, &fwd.hs_cache, &dhs, grads);
        self.tgt_enc.backward(ps, &fwd.ht_cache, &dht, grads);
    }

    /// Source-side quantities reused across decoding steps.
    pub fn encode_source(&self, src_ids: &[u32]) -> Result<SourceEncoding> {
        if src_ids.first() != Some(&BOS) {
            return Err(Error::Data("source must start with the sentinel".into()));
        }
        let (hs, _) = self.src_enc.forward(&self.params, src_ids)?;
        let a = self.proj_src.forward(&self.params, &hs);
        Ok(SourceEncoding { hs, a })
    }

    /// Encoding of the last position of a sentinel-prefixed target prefix.
    pub fn encode_target_last(&self, tgt_ids: &[u32]) -> Result<Vec<f64>> {
        let (ht, _) = self.tgt_enc.forward(&self.params, tgt_ids)?;
        Ok(ht.row(ht.rows() - 1).to_vec())
    }

    /// Head outputs for the contexts of every source row with one target row.
    pub fn column_head_outputs(&self, src: &SourceEncoding, target_row: &[f64]) -> Mat {
        let ht = Mat::from_vec(1, target_row.len(), target_row.to_vec());
        let (_, _, ctx, _) = self.contexts(&src.a, &ht, &src.hs);
        self.head.forward(&self.params, &ctx)
    }

    /// Log-softmax of the cell whose logits come from the given head-output rows:
    /// `own` supplies the deletion logit, `prev` the insertion/substitution logits
    /// (`None` at the first column).
    pub fn transduction_cell(&self, own: &[f64], prev: Option<&[f64]>) -> Vec<f64> {
        let mut out = vec![0.0; own.len()];
        out[0] = own[0];
        out[1..].copy_from_slice(&prev.unwrap_or(self.head_bias())[1..]);
        log_softmax_in_place(&mut out);
        out
    }
}

#[derive(Clone, Debug)]
pub struct SourceEncoding {
    hs: Mat,
    a: Mat,
}

impl SourceEncoding {
    /// Number of source rows including the sentinel.
    pub fn rows(&self) -> usize {
        self.hs.rows()
    }
}
