use rand::Rng;

use super::layers::Linear;
use super::mat::Mat;
use super::params::{Gradients, Init, ParamId, ParamStore};
use crate::error::Result;

/// Gated recurrent unit run over a whole sequence from a zero initial state.
///
/// ```text
/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// n = tanh(W_n x + U_n (r * h) + b_n)
/// h' = (1 - z) * h + z * n
/// ```
#[derive(Clone, Debug)]
pub struct GruCell {
    pub input: Linear,
    pub recurrent: ParamId,
    pub hidden: usize,
}

#[derive(Clone, Debug)]
pub struct GruCache {
    inputs: Mat,
    /// Hidden states, row 0 is the zero initial state.
    states: Mat,
    z: Mat,
    r: Mat,
    n: Mat,
}

impl GruCache {
    /// Output states, one row per input position.
    pub fn outputs(&self) -> Mat {
        let rows = self.states.rows() - 1;
        let h = self.states.cols();
        Mat::from_vec(rows, h, self.states.data()[h..].to_vec())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GruCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (hidden as f64).sqrt();
        let lin = Linear::new(store, &format!("{name}.input"), input, 3 * hidden, true, rng)?;
        let recurrent = store.add(&format!("{name}.recurrent"), &[3 * hidden, hidden], Init::Uniform(bound), rng)?;
        Ok(Self { input: lin, recurrent, hidden })
    }

    pub fn forward(&self, ps: &ParamStore, x: &Mat) -> GruCache {
        let h = self.hidden;
        let steps = x.rows();
        let proj = self.input.forward(ps, x);
        let u = ps.get(self.recurrent);
        let mut states = Mat::zeros(steps + 1, h);
        let mut z = Mat::zeros(steps, h);
        let mut r = Mat::zeros(steps, h);
        let mut n = Mat::zeros(steps, h);
        let mut rh = vec![0.0; h];
        for t in 0..steps {
            let prev = states.row(t).to_vec();
            let p = proj.row(t);
            for k in 0..h {
                let uz = &u[k * h..(k + 1) * h];
                let ur = &u[(h + k) * h..(h + k + 1) * h];
                let az = p[k] + dot(uz, &prev);
                let ar = p[h + k] + dot(ur, &prev);
                z.row_mut(t)[k] = sigmoid(az);
                r.row_mut(t)[k] = sigmoid(ar);
            }
            for k in 0..h {
                rh[k] = r.get(t, k) * prev[k];
            }
            for k in 0..h {
                let un = &u[(2 * h + k) * h..(2 * h + k + 1) * h];
                n.row_mut(t)[k] = (p[2 * h + k] + dot(un, &rh)).tanh();
            }
            let next = states.row_mut(t + 1);
            for k in 0..h {
                let zk = z.get(t, k);
                next[k] = (1.0 - zk) * prev[k] + zk * n.get(t, k);
            }
        }
        GruCache { inputs: x.clone(), states, z, r, n }
    }

    /// Back-propagates output-state gradients through time; returns input gradients.
    pub fn backward(&self, ps: &ParamStore, cache: &GruCache, d_out: &Mat, grads: &mut Gradients) -> Mat {
        let h = self.hidden;
        let steps = d_out.rows();
        let u = ps.get(self.recurrent);
        let mut d_proj = Mat::zeros(steps, 3 * h);
        let mut dh = vec![0.0; h];
        let mut rh = vec![0.0; h];
        let mut drh = vec![0.0; h];
        let mut dh_prev = vec![0.0; h];
        {
            let du = grads.get_mut(self.recurrent);
            for t in (0..steps).rev() {
                for k in 0..h {
                    dh[k] += d_out.get(t, k);
                }
                let prev = cache.states.row(t);
                let (z, r, n) = (cache.z.row(t), cache.r.row(t), cache.n.row(t));
                for k in 0..h {
                    rh[k] = r[k] * prev[k];
                }
                let dp = d_proj.row_mut(t);
                for k in 0..h {
                    let dn = dh[k] * z[k];
                    let dz = dh[k] * (n[k] - prev[k]);
                    dh_prev[k] = dh[k] * (1.0 - z[k]);
                    dp[2 * h + k] = dn * (1.0 - n[k] * n[k]);
                    dp[k] = dz * z[k] * (1.0 - z[k]);
                }
                drh.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..h {
                    let da = dp[2 * h + k];
                    let row = (2 * h + k) * h;
                    for c in 0..h {
                        du[row + c] += da * rh[c];
                        drh[c] += u[row + c] * da;
                    }
                }
                for k in 0..h {
                    let dr = drh[k] * prev[k];
                    dh_prev[k] += drh[k] * r[k];
                    dp[h + k] = dr * r[k] * (1.0 - r[k]);
                }
                for k in 0..h {
                    let (daz, dar) = (dp[k], dp[h + k]);
                    let (rz, rr) = (k * h, (h + k) * h);
                    for c in 0..h {
                        du[rz + c] += daz * prev[c];
                        du[rr + c] += dar * prev[c];
                        dh_prev[c] += u[rz + c] * daz + u[rr + c] * dar;
                    }
                }
                dh.copy_from_slice(&dh_prev);
            }
        }
        self.input.backward(ps, &cache.inputs, &d_proj, grads)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
