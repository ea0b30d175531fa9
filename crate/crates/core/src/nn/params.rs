//! Named parameter tensors and gradient buffers.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub type ParamId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub rows: usize,
    /// 1 for vectors.
    pub cols: usize,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: Vec<ParamTensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a zero-initialized tensor.
    pub fn add(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        assert!(self.id(name).is_none(), "duplicate parameter {name}");
        let n = rows * cols;
        self.tensors.push(ParamTensor {
            name: name.to_string(),
            rows,
            cols,
            values: vec![0.0; n],
            grad: vec![0.0; n],
        });
        self.tensors.len() - 1
    }

    /// Adds a matrix initialized uniform in `±1/sqrt(cols)`.
    pub fn add_uniform(&mut self, name: &str, rows: usize, cols: usize, rng: &mut Rng) -> ParamId {
        let id = self.add(name, rows, cols);
        let bound = 1.0 / (cols as f64).sqrt();
        for v in &mut self.tensors[id].values {
            *v = rng.gen_range(-bound..bound);
        }
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor {
        &mut self.tensors[id]
    }

    pub fn tensors(&self) -> &[ParamTensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn gradients(&self) -> Gradients {
        Gradients::zeros(self)
    }

    /// Adds a private gradient buffer into the tensors' `grad` fields.
    pub fn accumulate(&mut self, g: &Gradients) -> Result<()> {
        if g.bufs.len() != self.tensors.len() {
            return Err(Error::Shape("gradient buffer does not match parameter set".into()));
        }
        for (t, b) in self.tensors.iter_mut().zip(&g.bufs) {
            if b.len() != t.grad.len() {
                return Err(Error::Shape(format!("gradient for {} has wrong length", t.name)));
            }
            for (x, y) in t.grad.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for t in &self.tensors {
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("parameter {}", t.name)));
            }
        }
        Ok(())
    }
}

/// Per-episode gradient accumulator aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(ps: &ParamSet) -> Self {
        Gradients { bufs: ps.tensors.iter().map(|t| vec![0.0; t.len()]).collect() }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.bufs.iter_mut().flatten().for_each(|x| *x *= s);
    }

    pub fn norm(&self) -> f64 {
        self.bufs.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|x| x.is_finite())
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id]
    }
}
