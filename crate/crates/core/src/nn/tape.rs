//! Reverse-mode tape over small dense vectors.

use super::params::{Gradients, ParamId, ParamSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    Affine { w: ParamId, x: Var, b: Option<ParamId>, nz: Vec<usize> },
    Add(Var, Var),
    Tanh(Var),
    /// `arg[i]` indexes the input that won coordinate `i`.
    Max { inputs: Vec<Var>, arg: Vec<usize> },
    Concat(Vec<Var>),
    Detach,
    LogSoftmax { x: Var, mask: Vec<bool> },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
    needs_grad: bool,
}

/// Records forward ops against a frozen parameter set.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    fn push(&mut self, op: Op, value: Vec<f64>, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Input, value, false)
    }

    /// A whole parameter tensor used as a vector.
    pub fn param(&mut self, p: ParamId) -> Var {
        let value = self.params.get(p).values.clone();
        self.push(Op::Param(p), value, true)
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: ParamId, x: Var, b: Option<ParamId>) -> Result<Var> {
        let wt = self.params.get(w);
        let xv = &self.nodes[x.0].value;
        if wt.cols != xv.len() {
            return Err(Error::Shape(format!("{} is {}x{} but input has width {}", wt.name, wt.rows, wt.cols, xv.len())));
        }
        let mut out = match b {
            Some(b) => {
                let bt = self.params.get(b);
                if bt.len() != wt.rows {
                    return Err(Error::Shape(format!("bias {} has length {} for {} rows", bt.name, bt.len(), wt.rows)));
                }
                bt.values.clone()
            }
            None => vec![0.0; wt.rows],
        };
        let nz: Vec<usize> = (0..xv.len()).filter(|&j| xv[j] != 0.0).collect();
        let c = wt.cols;
        if nz.len() * 2 < c {
            for &j in &nz {
                let xj = xv[j];
                for (i, o) in out.iter_mut().enumerate() {
                    *o += wt.values[i * c + j] * xj;
                }
            }
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                let row = &wt.values[i * c..(i + 1) * c];
                *o += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(self.push(Op::Affine { w, x, b, nz }, out, true))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.len() != bv.len() {
            return Err(Error::Shape(format!("add of widths {} and {}", av.len(), bv.len())));
        }
        let out = av.iter().zip(bv).map(|(x, y)| x + y).collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), out, ng))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        let ng = self.needs(x);
        self.push(Op::Tanh(x), out, ng)
    }

    /// Element-wise max over a set; an empty set gives zeros of `width`.
    pub fn max(&mut self, inputs: &[Var], width: usize) -> Result<Var> {
        if inputs.is_empty() {
            return Ok(self.push(Op::Input, vec![0.0; width], false));
        }
        for &v in inputs {
            if self.nodes[v.0].value.len() != width {
                return Err(Error::Shape(format!("max input of width {} (expected {width})", self.nodes[v.0].value.len())));
            }
        }
        let mut out = self.nodes[inputs[0].0].value.clone();
        let mut arg = vec![0usize; width];
        for (k, &v) in inputs.iter().enumerate().skip(1) {
            for (i, &x) in self.nodes[v.0].value.iter().enumerate() {
                if x > out[i] {
                    out[i] = x;
                    arg[i] = k;
                }
            }
        }
        let ng = inputs.iter().any(|&v| self.needs(v));
        Ok(self.push(Op::Max { inputs: inputs.to_vec(), arg }, out, ng))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::with_capacity(parts.iter().map(|v| self.nodes[v.0].value.len()).sum());
        for v in parts {
            out.extend_from_slice(&self.nodes[v.0].value);
        }
        let ng = parts.iter().any(|&v| self.needs(v));
        self.push(Op::Concat(parts.to_vec()), out, ng)
    }

    /// Same value, no gradient flows back through it.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.clone();
        self.push(Op::Detach, value, false)
    }

    /// Log-probabilities; masked entries are `-inf`.
    pub fn masked_log_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if xv.len() != mask.len() {
            return Err(Error::Shape(format!("mask of length {} for {} logits", mask.len(), xv.len())));
        }
        let out = log_softmax(xv, mask)?;
        let ng = self.needs(x);
        Ok(self.push(Op::LogSoftmax { x, mask: mask.to_vec() }, out, ng))
    }

    /// Back-propagates the seed gradients into `grads`.
    pub fn backward(&self, seeds: &[(Var, Vec<f64>)], grads: &mut Gradients) -> Result<()> {
        let mut g: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for (v, s) in seeds {
            if s.len() != self.nodes[v.0].value.len() {
                return Err(Error::Shape("seed width differs from node width".into()));
            }
            accumulate(&mut g[v.0], s);
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(gi) = g[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input | Op::Detach => {}
                Op::Param(p) => {
                    for (a, b) in grads.bufs[*p].iter_mut().zip(&gi) {
                        *a += b;
                    }
                }
                Op::Affine { w, x, b, nz } => {
                    let wt = self.params.get(*w);
                    let c = wt.cols;
                    let xv = &self.nodes[x.0].value;
                    let dw = &mut grads.bufs[*w];
                    for (i, &gi) in gi.iter().enumerate() {
                        if gi == 0.0 {
                            continue;
                        }
                        for &j in nz {
                            dw[i * c + j] += gi * xv[j];
                        }
                    }
                    if let Some(b) = b {
                        for (a, v) in grads.bufs[*b].iter_mut().zip(&gi) {
                            *a += v;
                        }
                    }
                    if self.needs(*x) {
                        let mut dx = vec![0.0; c];
                        for (i, &gv) in gi.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            let row = &wt.values[i * c..(i + 1) * c];
                            for (d, w) in dx.iter_mut().zip(row) {
                                *d += w * gv;
                            }
                        }
                        accumulate(&mut g[x.0], &dx);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut g[a.0], &gi);
                    }
                    if self.needs(*b) {
                        accumulate(&mut g[b.0], &gi);
                    }
                }
                Op::Tanh(x) => {
                    let d: Vec<f64> = gi.iter().zip(&node.value).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut g[x.0], &d);
                }
                Op::Max { inputs, arg } => {
                    for (k, &v) in inputs.iter().enumerate() {
                        if !self.needs(v) {
                            continue;
                        }
                        if !arg.contains(&k) {
                            continue;
                        }
                        let d: Vec<f64> = gi.iter().zip(arg).map(|(&g, &a)| if a == k { g } else { 0.0 }).collect();
                        accumulate(&mut g[v.0], &d);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &v in parts {
                        let n = self.nodes[v.0].value.len();
                        if self.needs(v) {
                            accumulate(&mut g[v.0], &gi[off..off + n]);
                        }
                        off += n;
                    }
                }
                Op::LogSoftmax { x, mask } => {
                    let total: f64 = gi.iter().zip(mask).filter(|(_, &m)| m).map(|(g, _)| g).sum();
                    let d: Vec<f64> = (0..gi.len())
                        .map(|i| if mask[i] { gi[i] - node.value[i].exp() * total } else { 0.0 })
                        .collect();
                    accumulate(&mut g[x.0], &d);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, d: &[f64]) {
    match slot {
        Some(v) => v.iter_mut().zip(d).for_each(|(a, b)| *a += b),
        None => *slot = Some(d.to_vec()),
    }
}

fn log_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::MaskFault("every action is masked".into()));
    }
    let sum: f64 = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(&x, _)| (x - max).exp()).sum();
    let lse = max + sum.ln();
    Ok(logits.iter().zip(mask).map(|(&x, &m)| if m { x - lse } else { f64::NEG_INFINITY }).collect())
}

/// Probabilities over the unmasked entries; masked entries are exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::Shape(format!("mask of length {} for {} logits", mask.len(), logits.len())));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::MaskFault("every action is masked".into()));
    }
    let e: Vec<f64> = logits.iter().zip(mask).map(|(&x, &m)| if m { (x - max).exp() } else { 0.0 }).collect();
    let s: f64 = e.iter().sum();
    Ok(e.into_iter().map(|x| x / s).collect())
}
