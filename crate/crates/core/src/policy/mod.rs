//! KG-based dialogue state tracking and the manager/worker policies.
//!
//! Node states follow `E^k(v) = max_{v' in N(v)} tanh(W^k E^{k-1}(v'))` over
//! in-neighbours of the reversed graph, concatenated over depths 0..=K; the
//! User state max-pools `tanh(W^p E(v_p))` over the four personal nodes.
//! Candidates are scored by `w_o . tanh(W_s state + W_c cand + b_h)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dialogue::{DialogueGraph, FeatureMatrix, NodeId, Topology, FEATURE_WIDTH};
use crate::episode::{Agent, Controller, DecisionPoint, Episode, Mode};
use crate::error::{Error, Result};
use crate::kg::Item;
use crate::nn::{Checkpoint, Group, ParamId, ParamSet, Tape, Var};
use crate::rng::{self, Rng};


#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Hierarchical policy over message-passing states.
    #[serde(rename = "full-s")]
    FullS,
    /// Hierarchical policy without message passing (K = 0).
    #[serde(rename = "hp-s")]
    HpS,
    /// Single flat agent over message-passing states.
    #[serde(rename = "mp-s")]
    MpS,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::FullS, Variant::HpS, Variant::MpS];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FullS => "full-s",
            Variant::HpS => "hp-s",
            Variant::MpS => "mp-s",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Variant::MpS => Mode::Flat,
            _ => Mode::Hierarchical,
        }
    }

    /// Message-passing depth used unless overridden.
    pub fn default_depth(self) -> usize {
        match self {
            Variant::HpS => 0,
            _ => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "fulls" | "full" => Ok(Variant::FullS),
            "hps" => Ok(Variant::HpS),
            "mps" => Ok(Variant::MpS),
            _ => Err(Error::Invalid(format!("unknown variant `{s}` (expected full-s, hp-s or mp-s)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Hidden width `d` of every message-passing layer.
    pub hidden: usize,
    /// Message-passing depth; `None` uses the variant's default.
    pub depth: Option<usize>,
    pub scorer_hidden: usize,
    pub value_hidden: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { hidden: 64, depth: None, scorer_hidden: 64, value_hidden: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Scorer {
    ws: ParamId,
    wc: ParamId,
    bh: ParamId,
    wo: ParamId,
    /// Decision embeddings, Fraud then NonFraud.
    decisions: [ParamId; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ValueNet {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

/// A variant, its hyper-parameters and its named weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub variant: Variant,
    pub config: PolicyConfig,
    pub depth: usize,
    pub params: ParamSet,
    wk: Vec<ParamId>,
    wp: ParamId,
    manager: Scorer,
    worker: Option<Scorer>,
    value_m: ValueNet,
    value_w: Option<ValueNet>,
}

impl Policy {
    pub fn new(variant: Variant, config: PolicyConfig, seed: u64) -> Self {
        let depth = config.depth.unwrap_or_else(|| variant.default_depth());
        let d = config.hidden;
        let node_width = FEATURE_WIDTH + depth * d;
        let mut r = rng::stream(seed, &[0x9011c7]);
        let mut ps = ParamSet::new();
        let wk = (1..=depth)
            .map(|k| {
                let fan_in = if k == 1 { FEATURE_WIDTH } else { d };
                ps.add_uniform(&format!("dst.w{k}"), d, fan_in, &mut r)
            })
            .collect();
        let wp = ps.add_uniform("dst.wp", d, node_width, &mut r);
        let h = config.scorer_hidden;
        let scorer = |ps: &mut ParamSet, r: &mut Rng, name: &str, state_width: usize| Scorer {
            ws: ps.add_uniform(&format!("{name}.ws"), h, state_width, r),
            wc: ps.add_uniform(&format!("{name}.wc"), h, node_width, r),
            bh: ps.add(&format!("{name}.bh"), h, 1),
            wo: ps.add_uniform(&format!("{name}.wo"), 1, h, r),
            decisions: [
                ps.add_uniform(&format!("{name}.e_fraud"), node_width, 1, r),
                ps.add_uniform(&format!("{name}.e_nonfraud"), node_width, 1, r),
            ],
        };
        let manager = scorer(&mut ps, &mut r, "manager", d);
        let worker = (variant.mode() == Mode::Hierarchical).then(|| scorer(&mut ps, &mut r, "worker", node_width));
        let vh = config.value_hidden;
        let value = |ps: &mut ParamSet, r: &mut Rng, name: &str, width: usize| ValueNet {
            w1: ps.add_uniform(&format!("{name}.w1"), vh, width, r),
            b1: ps.add(&format!("{name}.b1"), vh, 1),
            w2: ps.add_uniform(&format!("{name}.w2"), 1, vh, r),
            b2: ps.add(&format!("{name}.b2"), 1, 1),
        };
        let value_m = value(&mut ps, &mut r, "value_m", d);
        let value_w = worker.map(|_| value(&mut ps, &mut r, "value_w", node_width));
        Policy { variant, config, depth, params: ps, wk, wp, manager, worker, value_m, value_w }
    }

    pub fn node_width(&self) -> usize {
        FEATURE_WIDTH + self.depth * self.config.hidden
    }

    pub fn group_of(name: &str) -> Group {
        if name.starts_with("value_") {
            Group::Value
        } else {
            Group::Policy
        }
    }

    pub fn checkpoint_meta(&self) -> serde_json::Value {
        serde_json::json!({
            "variant": self.variant,
            "policy": self.config,
            "depth": self.depth,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.params, self.checkpoint_meta(), None)
    }

    /// Rebuilds a policy from a checkpoint, taking variant and widths from its metadata.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let variant: Variant = serde_json::from_value(ck.meta["variant"].clone())
            .map_err(|e| Error::Checkpoint(format!("checkpoint metadata lacks a variant: {e}")))?;
        let config: PolicyConfig = serde_json::from_value(ck.meta["policy"].clone())
            .map_err(|e| Error::Checkpoint(format!("checkpoint metadata lacks policy widths: {e}")))?;
        let mut p = Policy::new(variant, config, 0);
        ck.restore_into(&mut p.params)?;
        Ok(p)
    }

    pub fn forward<'a>(&'a self, topo: &'a Topology, features: &'a FeatureMatrix) -> Forward<'a> {
        let n = topo.n_nodes();
        Forward {
            tape: Tape::new(&self.params),
            policy: self,
            topo,
            features,
            ek: vec![vec![None; n]; self.depth + 1],
            msg: vec![vec![None; n]; self.depth + 1],
            full: vec![None; n],
            user: None,
        }
    }
}

/// Lazily memoized forward pass over one dialogue state.
pub struct Forward<'a> {
    pub tape: Tape<'a>,
    policy: &'a Policy,
    topo: &'a Topology,
    features: &'a FeatureMatrix,
    ek: Vec<Vec<Option<Var>>>,
    msg: Vec<Vec<Option<Var>>>,
    full: Vec<Option<Var>>,
    user: Option<Var>,
}

impl<'a> Forward<'a> {
    /// `E^k(v)`.
    pub fn depth_embedding(&mut self, k: usize, v: NodeId) -> Result<Var> {
        if let Some(x) = self.ek[k][v] {
            return Ok(x);
        }
        let x = if k == 0 {
            self.tape.input(self.features.dense(v))
        } else {
            let preds = self.topo.in_neighbors[v].clone();
            let mut msgs = Vec::with_capacity(preds.len());
            for u in preds {
                msgs.push(self.message(k, u)?);
            }
            self.tape.max(&msgs, self.policy.config.hidden)?
        };
        self.ek[k][v] = Some(x);
        Ok(x)
    }

    /// `tanh(W^k E^{k-1}(u))`, the message `u` sends at depth `k`.
    fn message(&mut self, k: usize, u: NodeId) -> Result<Var> {
        if let Some(m) = self.msg[k][u] {
            return Ok(m);
        }
        let prev = self.depth_embedding(k - 1, u)?;
        let z = self.tape.affine(self.policy.wk[k - 1], prev, None)?;
        let m = self.tape.tanh(z);
        self.msg[k][u] = Some(m);
        Ok(m)
    }

    /// `E(v)`: concatenation over depths.
    pub fn node(&mut self, v: NodeId) -> Result<Var> {
        if let Some(x) = self.full[v] {
            return Ok(x);
        }
        let mut parts = Vec::with_capacity(self.policy.depth + 1);
        for k in 0..=self.policy.depth {
            parts.push(self.depth_embedding(k, v)?);
        }
        let x = self.tape.concat(&parts);
        self.full[v] = Some(x);
        Ok(x)
    }

    /// `E(v_u)`.
    pub fn user(&mut self) -> Result<Var> {
        if let Some(u) = self.user {
            return Ok(u);
        }
        let mut msgs = Vec::with_capacity(4);
        for p in self.topo.personal {
            let e = self.node(p)?;
            let z = self.tape.affine(self.policy.wp, e, None)?;
            msgs.push(self.tape.tanh(z));
        }
        let u = self.tape.max(&msgs, self.policy.config.hidden)?;
        self.user = Some(u);
        Ok(u)
    }

    fn score(&mut self, s: Scorer, state: Var, candidates: &[Var]) -> Result<Var> {
        let hs = self.tape.affine(s.ws, state, None)?;
        let mut logits = Vec::with_capacity(candidates.len());
        for &c in candidates {
            let z = self.tape.affine(s.wc, c, Some(s.bh))?;
            let z = self.tape.add(hs, z)?;
            let h = self.tape.tanh(z);
            logits.push(self.tape.affine(s.wo, h, None)?);
        }
        Ok(self.tape.concat(&logits))
    }

    fn scorer(&self, agent: Agent) -> Result<Scorer> {
        match agent {
            Agent::Manager | Agent::Flat => Ok(self.policy.manager),
            Agent::Worker(_) => self
                .policy
                .worker
                .ok_or_else(|| Error::Invalid(format!("{} has no worker policy", self.policy.variant))),
        }
    }

    /// Unnormalized candidate logits in [`DecisionPoint`] order.
    pub fn logits(&mut self, agent: Agent) -> Result<Var> {
        let s = self.scorer(agent)?;
        let (state, nodes): (Var, Vec<NodeId>) = match agent {
            Agent::Manager => (self.user()?, self.topo.personal.to_vec()),
            Agent::Worker(item) => {
                let p = self.topo.personal[item.index()];
                (self.node(p)?, self.topo.worker_answers[item.index()].clone())
            }
            Agent::Flat => (self.user()?, self.topo.askable.keys().map(|&(_, a)| a).collect()),
        };
        let mut cands = Vec::with_capacity(nodes.len() + 2);
        for v in nodes {
            cands.push(self.node(v)?);
        }
        for d in s.decisions {
            cands.push(self.tape.param(d));
        }
        self.score(s, state, &cands)
    }

    /// Masked log-probabilities of the agent's candidates.
    pub fn log_probs(&mut self, agent: Agent, mask: &[bool]) -> Result<Var> {
        let logits = self.logits(agent)?;
        if self.tape.value(logits).len() != mask.len() {
            return Err(Error::Shape(format!(
                "{agent:?} has {} candidates but the mask has {}",
                self.tape.value(logits).len(),
                mask.len()
            )));
        }
        self.tape.masked_log_softmax(logits, mask)
    }

    /// Baseline value of the agent's (detached) state.
    pub fn value(&mut self, agent: Agent) -> Result<Var> {
        let (net, state) = match agent {
            Agent::Manager | Agent::Flat => (self.policy.value_m, self.user()?),
            Agent::Worker(item) => {
                let net = self
                    .policy
                    .value_w
                    .ok_or_else(|| Error::Invalid(format!("{} has no worker value net", self.policy.variant)))?;
                (net, self.node(self.topo.personal[item.index()])?)
            }
        };
        let x = self.tape.detach(state);
        let h = self.tape.affine(net.w1, x, Some(net.b1))?;
        let h = self.tape.tanh(h);
        self.tape.affine(net.w2, h, Some(net.b2))
    }
}

/// Computed node and User states of one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct StateEmbeddings {
    pub nodes: Vec<Vec<f64>>,
    pub user: Vec<f64>,
}

pub fn message_passing(graph: &DialogueGraph, policy: &Policy) -> Result<StateEmbeddings> {
    let feats = graph.encode_all();
    let topo = graph.topology();
    let mut f = policy.forward(topo, &feats);
    let mut nodes = Vec::with_capacity(topo.n_nodes());
    for v in 0..topo.n_nodes() {
        let x = f.node(v)?;
        nodes.push(f.tape.value(x).to_vec());
    }
    let u = f.user()?;
    Ok(StateEmbeddings { nodes, user: f.tape.value(u).to_vec() })
}

/// Probabilities of an agent's candidates in a given state.
pub fn distribution(policy: &Policy, topo: &Topology, features: &FeatureMatrix, agent: Agent, mask: &[bool]) -> Result<Vec<f64>> {
    let mut f = policy.forward(topo, features);
    let lp = f.log_probs(agent, mask)?;
    Ok(f.tape.value(lp).iter().map(|x| x.exp()).collect())
}

/// Highest-probability legal index; ties go to the lowest index.
pub fn argmax(probs: &[f64], mask: &[bool]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, (&p, &m)) in probs.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|b| p > probs[b]) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::MaskFault("every action is masked".into()))
}

pub fn sample(probs: &[f64], mask: &[bool], rng: &mut Rng) -> Result<usize> {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, (&p, &m)) in probs.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return Ok(i);
        }
    }
    last.ok_or_else(|| Error::MaskFault("every action is masked".into()))
}

#[derive(Debug)]
pub enum Selection {
    Greedy,
    Sample(Rng),
}

/// Drives an [`Episode`] with a policy; keeps the last distribution for inspection.
pub struct PolicyController<'p> {
    pub policy: &'p Policy,
    pub selection: Selection,
    pub last_probs: Vec<f64>,
    pub history: Option<Vec<(Agent, Vec<f64>)>>,
}

impl<'p> PolicyController<'p> {
    pub fn greedy(policy: &'p Policy) -> Self {
        PolicyController { policy, selection: Selection::Greedy, last_probs: Vec::new(), history: None }
    }

    pub fn sampling(policy: &'p Policy, rng: Rng) -> Self {
        PolicyController { policy, selection: Selection::Sample(rng), last_probs: Vec::new(), history: None }
    }

    pub fn recording(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }
}

impl Controller for PolicyController<'_> {
    fn choose(&mut self, episode: &Episode, dp: &DecisionPoint) -> Result<usize> {
        let feats = episode.graph().encode_all();
        let probs = distribution(self.policy, episode.topology(), &feats, dp.agent, &dp.mask)?;
        let idx = match &mut self.selection {
            Selection::Greedy => argmax(&probs, &dp.mask)?,
            Selection::Sample(r) => sample(&probs, &dp.mask, r)?,
        };
        if let Some(h) = &mut self.history {
            h.push((dp.agent, probs.clone()));
        }
        self.last_probs = probs;
        Ok(idx)
    }
}

/// Items in [`Item::ALL`] order for display.
pub fn manager_labels() -> [&'static str; 6] {
    [Item::School.name(), Item::Company.name(), Item::Residence.name(), Item::BirthPlace.name(), "Fraud", "NonFraud"]
}
