use rand::Rng;

use super::layers::Linear;
use super::mat::Mat;
use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// One-dimensional convolution over sequence positions with zero padding.
///
/// A centred kernel of width `k` reads positions `r - (k-1)/2 ..= r + (k-1)/2`;
/// a causal kernel reads `r - (k-1) ..= r`.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub linear: Linear,
    pub offsets: Vec<isize>,
    pub in_dim: usize,
}

impl Conv1d {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        width: usize,
        causal: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if width == 0 || (!causal && width % 2 == 0) {
            return Err(Error::Config(format!("convolution width must be odd and positive, got {width}")));
        }
        let offsets: Vec<isize> = if causal {
            (0..width).map(|k| k as isize - (width as isize - 1)).collect()
        } else {
            let half = (width / 2) as isize;
            (-half..=half).collect()
        };
        let linear = Linear::new(store, name, in_dim * width, out_dim, true, rng)?;
        Ok(Self { linear, offsets, in_dim })
    }

    /// Concatenated input windows, one row per position.
    pub fn windows(&self, x: &Mat) -> Mat {
        let (rows, d) = (x.rows(), self.in_dim);
        let mut w = Mat::zeros(rows, d * self.offsets.len());
        for r in 0..rows {
            let out = w.row_mut(r);
            for (k, &o) in self.offsets.iter().enumerate() {
                let src = r as isize + o;
                if src >= 0 && (src as usize) < rows {
                    out[k * d..(k + 1) * d].copy_from_slice(x.row(src as usize));
                }
            }
        }
        w
    }

    pub fn forward(&self, ps: &ParamStore, x: &Mat) -> (Mat, Mat) {
        let windows = self.windows(x);
        (self.linear.forward(ps, &windows), windows)
    }

    pub fn backward(&self, ps: &ParamStore, windows: &Mat, dy: &Mat, grads: &mut Gradients) -> Mat {
        let dwin = self.linear.backward(ps, windows, dy, grads);
        let (rows, d) = (dy.rows(), self.in_dim);
        let mut dx = Mat::zeros(rows, d);
        for r in 0..rows {
            let g = dwin.row(r);
            for (k, &o) in self.offsets.iter().enumerate() {
                let src = r as isize + o;
                if src >= 0 && (src as usize) < rows {
                    for (acc, v) in dx.row_mut(src as usize).iter_mut().zip(&g[k * d..(k + 1) * d]) {
                        *acc += v;
                    }
                }
            }
        }
        dx
    }
}
