//! Gradients of the imitation and policy-gradient objectives.

use serde::{Deserialize, Serialize};

use crate::dialogue::Topology;
use crate::error::Result;
use crate::nn::{Gradients, Optimizer};
use crate::policy::{argmax, Policy};

use super::rewards::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Cross-entropy against the recorded actions.
    Imitation,
    /// `-(R - V) log pi(a)` with the value held fixed.
    Reinforce,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub steps: usize,
    pub policy_loss: f64,
    /// Sum of `(V - R)^2 / 2`.
    pub value_loss: f64,
    /// Steps whose recorded action is the policy's argmax.
    pub agreements: usize,
}

impl LossStats {
    pub fn mean_policy_loss(&self) -> f64 {
        self.policy_loss / self.steps.max(1) as f64
    }

    pub fn mean_value_loss(&self) -> f64 {
        self.value_loss / self.steps.max(1) as f64
    }

    pub fn agreement(&self) -> f64 {
        self.agreements as f64 / self.steps.max(1) as f64
    }
}

/// Adds one trajectory's gradients (summed over its steps) into `grads`.
pub fn accumulate(policy: &Policy, topo: &Topology, traj: &Trajectory, objective: Objective, grads: &mut Gradients, stats: &mut LossStats) -> Result<()> {
    for (k, step) in traj.steps.iter().enumerate() {
        let mut f = policy.forward(topo, &step.features);
        let lp = f.log_probs(step.agent, &step.mask)?;
        let v = f.value(step.agent)?;
        let logp = f.tape.value(lp);
        let value = f.tape.scalar(v);
        let ret = traj.returns[k];
        let probs: Vec<f64> = logp.iter().map(|x| x.exp()).collect();
        if argmax(&probs, &step.mask)? == step.chosen {
            stats.agreements += 1;
        }
        let weight = match objective {
            Objective::Imitation => 1.0,
            Objective::Reinforce => ret - value,
        };
        let mut seed = vec![0.0; step.mask.len()];
        seed[step.chosen] = -weight;
        stats.policy_loss += -weight * logp[step.chosen];
        stats.value_loss += 0.5 * (value - ret) * (value - ret);
        stats.steps += 1;
        f.tape.backward(&[(lp, seed), (v, vec![value - ret])], grads)?;
    }
    Ok(())
}

/// One optimizer step from a batch; returns the loss statistics and the
/// groups' gradient norms.
pub fn update(
    policy: &mut Policy,
    opt: &mut Optimizer,
    batch: &[(&Topology, &Trajectory)],
    objective: Objective,
) -> Result<(LossStats, (f64, f64))> {
    let mut grads = policy.params.gradients();
    let mut stats = LossStats::default();
    for (topo, traj) in batch {
        accumulate(policy, topo, traj, objective, &mut grads, &mut stats)?;
    }
    let norms = opt.step(&mut policy.params, &grads, batch.len())?;
    Ok((stats, norms))
}

/// Policy-gradient update on a batch of sampled trajectories.
pub fn reinforce_update(policy: &mut Policy, opt: &mut Optimizer, batch: &[(&Topology, &Trajectory)]) -> Result<LossStats> {
    Ok(update(policy, opt, batch, Objective::Reinforce)?.0)
}

/// Supervised epochs over fixed teacher trajectories; returns per-epoch stats.
pub fn pretrain(policy: &mut Policy, opt: &mut Optimizer, batch: &[(&Topology, &Trajectory)], epochs: usize) -> Result<Vec<LossStats>> {
    (0..epochs).map(|_| Ok(update(policy, opt, batch, Objective::Imitation)?.0)).collect()
}
