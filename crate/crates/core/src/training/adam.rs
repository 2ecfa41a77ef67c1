use crate::nn::{Gradients, ParamStore};

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.ids().map(|id| vec![0.0; params.values(id).len()]).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = params.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let g = grads.get(id);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for idx in 0..g.len() {
                m[idx] = self.beta1 * m[idx] + (1.0 - self.beta1) * g[idx];
                v[idx] = self.beta2 * v[idx] + (1.0 - self.beta2) * g[idx] * g[idx];
            }
            let (lr, eps) = (self.lr, self.eps);
            params.update(id, |idx, p| {
                let mh = m[idx] / c1;
                let vh = v[idx] / c2;
                (p as f64 - lr * mh / (vh.sqrt() + eps)) as f32
            });
        }
    }
}
