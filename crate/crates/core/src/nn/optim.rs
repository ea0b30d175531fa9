//! Gradient-descent optimizers with per-group norm clipping.

use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub kind: OptimizerKind,
    pub lr_policy: f64,
    pub lr_value: f64,
    /// Gradient-norm clip applied to each group separately; 0 disables it.
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { kind: OptimizerKind::Adam, lr_policy: 0.01, lr_value: 0.01, clip_norm: 5.0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl OptimConfig {
    pub fn check(&self) -> Result<()> {
        let ok = self.lr_policy > 0.0
            && self.lr_value > 0.0
            && self.clip_norm >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Group a tensor belongs to for learning rate and clipping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    Policy,
    Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    cfg: OptimConfig,
    groups: Vec<Group>,
    state: OptimizerState,
    lr_scale: f64,
}

impl Optimizer {
    pub fn new(cfg: OptimConfig, params: &ParamSet, group_of: impl Fn(&str) -> Group) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let adam = cfg.kind == OptimizerKind::Adam;
        Optimizer {
            groups: params.tensors().iter().map(|t| group_of(&t.name)).collect(),
            state: OptimizerState {
                step: 0,
                m: if adam { zeros.clone() } else { Vec::new() },
                v: if adam { zeros } else { Vec::new() },
            },
            cfg,
            lr_scale: 1.0,
        }
    }

    /// Multiplies both step sizes from the next step on.
    pub fn set_lr_scale(&mut self, scale: f64) {
        self.lr_scale = scale;
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn set_state(&mut self, state: OptimizerState) -> Result<()> {
        let want = if self.cfg.kind == OptimizerKind::Adam { self.groups.len() } else { 0 };
        if state.m.len() != want || state.v.len() != want {
            return Err(Error::Checkpoint("optimizer state does not match the model".into()));
        }
        self.state = state;
        Ok(())
    }

    /// One update from gradients summed over `batch` episodes.
    /// Returns the pre-clip norms of the (policy, value) groups.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients, batch: usize) -> Result<(f64, f64)> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let mut g = grads.clone();
        g.scale(1.0 / batch.max(1) as f64);
        let mut norms = [0.0f64; 2];
        for (buf, grp) in g.bufs.iter().zip(&self.groups) {
            norms[*grp as usize] += buf.iter().map(|x| x * x).sum::<f64>();
        }
        let norms = norms.map(f64::sqrt);
        let clip = self.cfg.clip_norm;
        for (buf, grp) in g.bufs.iter_mut().zip(&self.groups) {
            let n = norms[*grp as usize];
            if clip > 0.0 && n > clip {
                let s = clip / n;
                buf.iter_mut().for_each(|x| *x *= s);
            }
        }
        self.state.step += 1;
        let t = self.state.step as i32;
        let c = &self.cfg;
        for (k, (tensor, buf)) in params.tensors_mut().iter_mut().zip(&g.bufs).enumerate() {
            let lr = self.lr_scale
                * match self.groups[k] {
                    Group::Policy => c.lr_policy,
                    Group::Value => c.lr_value,
                };
            match c.kind {
                OptimizerKind::Sgd => {
                    for (w, d) in tensor.values.iter_mut().zip(buf) {
                        *w -= lr * d;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.state.m[k], &mut self.state.v[k]);
                    let bc1 = 1.0 - c.beta1.powi(t);
                    let bc2 = 1.0 - c.beta2.powi(t);
                    for i in 0..buf.len() {
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * buf[i];
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * buf[i] * buf[i];
                        tensor.values[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
                    }
                }
            }
        }
        params.check_finite()?;
        Ok((norms[0], norms[1]))
    }
}
