use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Clone, Copy, Debug)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `[-bound, bound]`.
    Uniform(f64),
    /// Zero-mean normal with the given standard deviation.
    Normal(f64),
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f32>,
    working: Vec<f64>,
}

/// Named parameter tensors. Canonical values are `f32`; an `f64` copy is kept in
/// sync for computation.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<R: Rng>(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut R) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        let len: usize = shape.iter().product();
        let values: Vec<f32> = match init {
            Init::Zeros => vec![0.0; len],
            Init::Ones => vec![1.0; len],
            Init::Uniform(bound) => {
                let dist = Uniform::new_inclusive(-bound, bound).map_err(|e| Error::Config(e.to_string()))?;
                (0..len).map(|_| dist.sample(rng) as f32).collect()
            }
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
                (0..len).map(|_| dist.sample(rng) as f32).collect()
            }
        };
        let working = values.iter().map(|&v| v as f64).collect();
        let id = ParamId(self.entries.len());
        self.entries.push(Entry { name: name.to_string(), shape: shape.to_vec(), values, working });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.values.len()).sum()
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.entries[id.0].shape
    }

    /// Values for computation.
    #[inline]
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].working
    }

    pub fn values(&self, id: ParamId) -> &[f32] {
        &self.entries[id.0].values
    }

    pub fn set_value(&mut self, id: ParamId, index: usize, value: f32) {
        let e = &mut self.entries[id.0];
        e.values[index] = value;
        e.working[index] = value as f64;
    }

    pub fn set_values(&mut self, id: ParamId, values: &[f32]) -> Result<()> {
        let e = &mut self.entries[id.0];
        if values.len() != e.values.len() {
            return Err(Error::Dimension(format!(
                "parameter `{}` has {} values, got {}",
                e.name,
                e.values.len(),
                values.len()
            )));
        }
        e.values.copy_from_slice(values);
        for (w, &v) in e.working.iter_mut().zip(values) {
            *w = v as f64;
        }
        Ok(())
    }

    /// Overrides one computation value, leaving the stored `f32` value as it is.
    /// Meant for finite-difference checks; the next update resynchronises it.
    pub fn set_working_value(&mut self, id: ParamId, index: usize, value: f64) {
        self.entries[id.0].working[index] = value;
    }

    /// Applies `f(index, value) -> new value` to every scalar of one tensor.
    pub fn update(&mut self, id: ParamId, mut f: impl FnMut(usize, f32) -> f32) {
        let e = &mut self.entries[id.0];
        for (k, (v, w)) in e.values.iter_mut().zip(e.working.iter_mut()).enumerate() {
            *v = f(k, *v);
            *w = *v as f64;
        }
    }
}

/// Gradient buffers parallel to a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { bufs: store.entries.iter().map(|e| vec![0.0; e.values.len()]).collect() }
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.bufs[id.0]
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.bufs.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.bufs.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn clear(&mut self) {
        self.bufs.iter_mut().flatten().for_each(|v| *v = 0.0);
    }
}
