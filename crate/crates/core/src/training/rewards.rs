//! Reward assignment and discounted returns at each agent's timescale.

use serde::{Deserialize, Serialize};

use crate::episode::{Action, Agent, Decision, Episode, Mode, Outcome, StepRecord};
use crate::error::{Error, Result};
use crate::kg::Item;
use crate::simulator::SimApplicant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub r_crt_m: f64,
    pub r_wrg_m: f64,
    pub r_crt_w: f64,
    pub r_wrg_w: f64,
    pub r_turn: f64,
    pub gamma_m: f64,
    pub gamma_w: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { r_crt_m: 3.0, r_wrg_m: 3.0, r_crt_w: 1.0, r_wrg_w: 1.0, r_turn: 0.1, gamma_m: 0.999, gamma_w: 0.99 }
    }
}

impl RewardConfig {
    pub fn check(&self) -> Result<()> {
        let pos = [self.r_crt_m, self.r_wrg_m, self.r_crt_w, self.r_wrg_w, self.r_turn];
        if pos.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
            return Err(Error::Invalid("rewards must be positive".into()));
        }
        for g in [self.gamma_m, self.gamma_w] {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Invalid(format!("discount {g} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Ground truth an episode is scored against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub identity: Decision,
    pub items: [Decision; 4],
}

impl Truth {
    pub fn of(applicant: &SimApplicant) -> Self {
        Truth { identity: applicant.identity, items: Item::ALL.map(|i| applicant.item_truth(i)) }
    }
}

/// `R_t = r_t + gamma R_{t+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Steps of one agent that share a discount, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub agent: Agent,
    pub gamma: f64,
    /// Indices into [`Trajectory::steps`].
    pub steps: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub rewards: Vec<f64>,
    pub returns: Vec<f64>,
    /// The manager (or flat) sequence first, then one per worker sub-episode.
    pub sequences: Vec<Sequence>,
    pub outcome: Outcome,
    pub truth: Truth,
    /// Index of the profile the episode was played on.
    pub profile: usize,
}

impl Trajectory {
    pub fn correct(&self) -> bool {
        self.outcome.decision == self.truth.identity
    }

    pub fn manager(&self) -> &Sequence {
        &self.sequences[0]
    }

    pub fn workers(&self) -> &[Sequence] {
        &self.sequences[1..]
    }
}

pub fn assign_rewards(ep: &Episode, truth: Truth, profile: usize, cfg: &RewardConfig) -> Result<Trajectory> {
    let outcome = ep.outcome().ok_or_else(|| Error::Invalid("episode has no final decision".into()))?;
    let steps = ep.steps().to_vec();
    let mut rewards = vec![0.0; steps.len()];
    let terminal = |d: Decision, want: Decision, crt: f64, wrg: f64| if d == want { crt } else { -wrg };
    let mut sequences = Vec::new();
    match ep.mode() {
        Mode::Flat => {
            for (k, s) in steps.iter().enumerate() {
                rewards[k] = match s.action {
                    Action::Ask { .. } => -cfg.r_turn,
                    Action::Decide { decision } => terminal(decision, truth.identity, cfg.r_crt_m, cfg.r_wrg_m),
                    Action::Select { .. } => return Err(Error::Invalid("flat episode selected a worker".into())),
                };
            }
            sequences.push(Sequence { agent: Agent::Flat, gamma: cfg.gamma_m, steps: (0..steps.len()).collect() });
        }
        Mode::Hierarchical => {
            let mut manager = Sequence { agent: Agent::Manager, gamma: cfg.gamma_m, steps: Vec::new() };
            let mut k = 0;
            while k < steps.len() {
                match (steps[k].agent, steps[k].action) {
                    (Agent::Manager, Action::Select { item }) => {
                        manager.steps.push(k);
                        let mut worker = Sequence { agent: Agent::Worker(item), gamma: cfg.gamma_w, steps: Vec::new() };
                        let mut asked = 0usize;
                        let mut j = k + 1;
                        while j < steps.len() && steps[j].agent == Agent::Worker(item) {
                            worker.steps.push(j);
                            rewards[j] = match steps[j].action {
                                Action::Ask { .. } => {
                                    asked += 1;
                                    -cfg.r_turn
                                }
                                Action::Decide { decision } => {
                                    terminal(decision, truth.items[item.index()], cfg.r_crt_w, cfg.r_wrg_w)
                                }
                                Action::Select { .. } => unreachable!("workers do not select"),
                            };
                            j += 1;
                        }
                        rewards[k] = -(asked as f64) * cfg.r_turn;
                        sequences.push(worker);
                        k = j;
                    }
                    (Agent::Manager, Action::Decide { decision }) => {
                        manager.steps.push(k);
                        rewards[k] = terminal(decision, truth.identity, cfg.r_crt_m, cfg.r_wrg_m);
                        k += 1;
                    }
                    (agent, action) => {
                        return Err(Error::Invalid(format!("step {k}: unexpected {action:?} by {agent:?}")));
                    }
                }
            }
            sequences.insert(0, manager);
        }
    }
    let mut returns = vec![0.0; steps.len()];
    for seq in &sequences {
        let r: Vec<f64> = seq.steps.iter().map(|&i| rewards[i]).collect();
        for (&i, g) in seq.steps.iter().zip(discounted_returns(&r, seq.gamma)) {
            returns[i] = g;
        }
    }
    Ok(Trajectory { steps, rewards, returns, sequences, outcome, truth, profile })
}
