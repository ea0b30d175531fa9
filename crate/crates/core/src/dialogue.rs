//! Per-applicant dialogue graph.
//!
//! Every personal-KG triplet `(h, r, t)` becomes the edge `t -> h`, so a head
//! reads from its tails during message passing, and each personal node feeds
//! a synthetic User node. Nodes carry one-hot static features (degree, type,
//! spread degree) and dialogue features updated by [`DialogueGraph::record_event`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{spread_degree, EntityId, Item, PersonalKg, Triplet, World};

pub type NodeId = usize;

pub const DEGREE_BINS: usize = 8;
pub const TYPE_BINS: usize = 5;
pub const SPREAD_BINS: usize = 8;
pub const COUNT_BINS: usize = 11;
pub const STATUS_BINS: usize = 3;

pub const OFF_DEGREE: usize = 0;
pub const OFF_TYPE: usize = OFF_DEGREE + DEGREE_BINS;
pub const OFF_SPREAD: usize = OFF_TYPE + TYPE_BINS;
pub const OFF_EXPLORED: usize = OFF_SPREAD + SPREAD_BINS;
pub const OFF_LAST: usize = OFF_EXPLORED + 1;
pub const OFF_TURNS: usize = OFF_LAST + 1;
pub const OFF_CORRECT: usize = OFF_TURNS + COUNT_BINS;
pub const OFF_INCORRECT: usize = OFF_CORRECT + COUNT_BINS;
pub const OFF_STATUS: usize = OFF_INCORRECT + COUNT_BINS;
/// Width of every depth-0 node embedding.
pub const FEATURE_WIDTH: usize = OFF_STATUS + STATUS_BINS;
const _: () = assert!(FEATURE_WIDTH <= 64);

/// Questions a single worker may ask.
pub const WORKER_TURN_CAP: usize = 10;

/// Degree buckets {<=1, 2, 3, 4, 5, 6-10, 11-20, >20}.
pub fn degree_bucket(degree: usize) -> usize {
    match degree {
        0 | 1 => 0,
        2..=5 => degree - 1,
        6..=10 => 5,
        11..=20 => 6,
        _ => 7,
    }
}

/// `floor(log10(x))` clamped to the bins {<1, 1-2, ..., 6-7, >=7}.
pub fn spread_bucket(spread: f64) -> usize {
    if spread < 10.0 {
        return 0;
    }
    (spread.log10().floor() as usize).min(SPREAD_BINS - 1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    #[default]
    NotAsked,
    AnsweredCorrect,
    AnsweredUnknown,
}

/// Immutable structure of one applicant's dialogue graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    /// Entity behind each non-User node.
    pub node_entity: Vec<EntityId>,
    pub user_node: NodeId,
    /// Node of each item, in [`Item::ALL`] order.
    pub personal: [NodeId; 4],
    pub is_answer: Vec<bool>,
    /// In-neighbours (message sources) of every node including User, ascending.
    pub in_neighbors: Vec<Vec<NodeId>>,
    /// Whether a non-User node is the source of some non-User edge.
    pub has_successor: Vec<bool>,
    /// One reversed edge `(tail node, head node, triplet)` per personal-KG triplet.
    pub edges: Vec<(NodeId, NodeId, Triplet)>,
    /// Triplet asked for each (item, answer node).
    pub askable: BTreeMap<(Item, NodeId), Triplet>,
    /// Answer nodes of each worker, ascending.
    pub worker_answers: [Vec<NodeId>; 4],
    /// Hot static bits per non-User node.
    static_bits: Vec<[usize; 3]>,
}

impl Topology {
    pub fn n_nodes(&self) -> usize {
        self.node_entity.len()
    }

    pub fn node_of(&self, entity: EntityId) -> Option<NodeId> {
        self.node_entity.iter().position(|&e| e == entity)
    }

    pub fn personal_item(&self, node: NodeId) -> Option<Item> {
        self.personal.iter().position(|&p| p == node).and_then(Item::from_index)
    }

    pub fn n_askable(&self) -> usize {
        self.askable.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct NodeState {
    explored: bool,
    turns: usize,
    n_correct: usize,
    n_incorrect: usize,
    status: AnswerStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum DialogueEvent {
    WorkerSelected { item: Item },
    QuestionAsked { item: Item, answer: NodeId },
    AnswerReceived { answer: NodeId, correct: bool },
}

/// Topology plus the live dialogue features of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct DialogueGraph {
    topo: Arc<Topology>,
    state: Vec<NodeState>,
    last_personal: Option<NodeId>,
    last_answer: Option<NodeId>,
    asked: BTreeSet<(Item, NodeId)>,
    pending: Option<(Item, NodeId)>,
}

/// Depth-0 embeddings of all non-User nodes as bitsets (`FEATURE_WIDTH` <= 64).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub bits: Vec<u64>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.bits.len()
    }

    pub fn is_hot(&self, v: NodeId, i: usize) -> bool {
        self.bits[v] >> i & 1 == 1
    }

    pub fn dense(&self, v: NodeId) -> Vec<f64> {
        (0..FEATURE_WIDTH).map(|i| if self.is_hot(v, i) { 1.0 } else { 0.0 }).collect()
    }
}

pub fn build_graph(pkg: &PersonalKg) -> Result<DialogueGraph> {
    if pkg.is_empty() {
        return Err(Error::Invalid("empty personal KG".into()));
    }
    let mut node_of: BTreeMap<EntityId, NodeId> = BTreeMap::new();
    let mut node_entity = Vec::new();
    let mut intern = |e: EntityId, node_entity: &mut Vec<EntityId>| {
        *node_of.entry(e).or_insert_with(|| {
            node_entity.push(e);
            node_entity.len() - 1
        })
    };
    let personal = pkg.profile.entities().map(|e| intern(e, &mut node_entity));
    let mut edges = Vec::new();
    for t in pkg.all() {
        let h = intern(t.head, &mut node_entity);
        let tl = intern(t.tail, &mut node_entity);
        edges.push((tl, h, *t));
    }
    let n = node_entity.len();
    let user_node = n;
    let mut in_sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n + 1];
    let mut has_successor = vec![false; n];
    for &(from, to, _) in &edges {
        in_sets[to].insert(from);
        has_successor[from] = true;
    }
    for &p in &personal {
        in_sets[user_node].insert(p);
    }

    let mut askable: BTreeMap<(Item, NodeId), Triplet> = BTreeMap::new();
    let mut is_answer = vec![false; n];
    for t in &pkg.askable {
        let item = pkg.head_item(t).expect("askable triplet headed by a profile item");
        let a = node_of[&t.tail];
        is_answer[a] = true;
        askable
            .entry((item, a))
            .and_modify(|cur| {
                if t.relation < cur.relation {
                    *cur = *t;
                }
            })
            .or_insert(*t);
    }
    let mut worker_answers: [Vec<NodeId>; 4] = Default::default();
    for &(item, a) in askable.keys() {
        worker_answers[item.index()].push(a);
    }
    for item in Item::ALL {
        let k = worker_answers[item.index()].len();
        if k < 4 {
            return Err(Error::Invalid(format!(
                "profile {}: {item} has only {k} askable triplets (need 4)",
                pkg.profile.applicant_id
            )));
        }
    }

    let static_bits = (0..n)
        .map(|v| {
            let degree = OFF_DEGREE + degree_bucket(in_sets[v].len());
            let item = personal.iter().position(|&p| p == v);
            let ty = OFF_TYPE + item.unwrap_or(4);
            let spread = if is_answer[v] {
                let s = spread_degree(pkg, node_entity[v]).expect("answer node has askable triplets");
                OFF_SPREAD + spread_bucket(s)
            } else {
                usize::MAX
            };
            [degree, ty, spread]
        })
        .collect();

    let topo = Topology {
        node_entity,
        user_node,
        personal,
        is_answer,
        in_neighbors: in_sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        has_successor,
        edges,
        askable,
        worker_answers,
        static_bits,
    };
    Ok(DialogueGraph::new(Arc::new(topo)))
}

impl DialogueGraph {
    pub fn new(topo: Arc<Topology>) -> Self {
        let n = topo.n_nodes();
        let mut g = DialogueGraph {
            topo,
            state: vec![NodeState::default(); n],
            last_personal: None,
            last_answer: None,
            asked: BTreeSet::new(),
            pending: None,
        };
        g.reset_dialogue_features();
        g
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn reset_dialogue_features(&mut self) {
        for s in &mut self.state {
            *s = NodeState::default();
        }
        self.last_personal = None;
        self.last_answer = None;
        self.asked.clear();
        self.pending = None;
    }

    pub fn pending(&self) -> Option<(Item, NodeId)> {
        self.pending
    }

    pub fn is_asked(&self, item: Item, answer: NodeId) -> bool {
        self.asked.contains(&(item, answer))
    }

    pub fn asked_count(&self, item: Item) -> usize {
        self.asked.range((item, 0)..=(item, usize::MAX)).count()
    }

    pub fn worker_turns(&self, item: Item) -> usize {
        self.state[self.topo.personal[item.index()]].turns
    }

    /// (correct, incorrect) answers about an item.
    pub fn answer_counts(&self, item: Item) -> (usize, usize) {
        let s = &self.state[self.topo.personal[item.index()]];
        (s.n_correct, s.n_incorrect)
    }

    pub fn is_explored(&self, v: NodeId) -> bool {
        self.state[v].explored
    }

    pub fn answer_status(&self, v: NodeId) -> AnswerStatus {
        self.state[v].status
    }

    pub fn record_event(&mut self, event: DialogueEvent) -> Result<()> {
        let reject = |m: String| Err(Error::EventRejected(m));
        match event {
            DialogueEvent::WorkerSelected { item } => {
                let p = self.topo.personal[item.index()];
                if self.pending.is_some() {
                    return reject("an answer is pending".into());
                }
                if self.state[p].explored {
                    return reject(format!("{item} was already selected"));
                }
                self.state[p].explored = true;
                self.last_personal = Some(p);
                self.last_answer = None;
            }
            DialogueEvent::QuestionAsked { item, answer } => {
                let p = self.topo.personal[item.index()];
                if self.pending.is_some() {
                    return reject("an answer is pending".into());
                }
                if !self.topo.askable.contains_key(&(item, answer)) {
                    return reject(format!("node {answer} is not an answer node of {item}"));
                }
                if self.asked.contains(&(item, answer)) {
                    return reject(format!("node {answer} was already asked for {item}"));
                }
                if self.state[p].turns >= WORKER_TURN_CAP {
                    return reject(format!("{item} reached its {WORKER_TURN_CAP}-question cap"));
                }
                self.state[p].explored = true;
                self.state[p].turns += 1;
                self.state[answer].explored = true;
                self.asked.insert((item, answer));
                self.last_personal = Some(p);
                self.last_answer = Some(answer);
                self.pending = Some((item, answer));
            }
            DialogueEvent::AnswerReceived { answer, correct } => {
                let Some((item, asked)) = self.pending else {
                    return reject("no question is pending".into());
                };
                if asked != answer {
                    return reject(format!("answer for node {answer} but node {asked} is pending"));
                }
                let p = self.topo.personal[item.index()];
                if correct {
                    self.state[p].n_correct += 1;
                    self.state[answer].status = AnswerStatus::AnsweredCorrect;
                } else {
                    self.state[p].n_incorrect += 1;
                    self.state[answer].status = AnswerStatus::AnsweredUnknown;
                }
                self.pending = None;
            }
        }
        Ok(())
    }

    fn hot_bits(&self, v: NodeId, out: &mut impl FnMut(usize)) {
        let [degree, ty, spread] = self.topo.static_bits[v];
        out(degree);
        out(ty);
        if spread != usize::MAX {
            out(spread);
        }
        let s = &self.state[v];
        if s.explored {
            out(OFF_EXPLORED);
        }
        if self.last_personal == Some(v) || self.last_answer == Some(v) {
            out(OFF_LAST);
        }
        if self.topo.personal.contains(&v) {
            out(OFF_TURNS + s.turns.min(COUNT_BINS - 1));
            out(OFF_CORRECT + s.n_correct.min(COUNT_BINS - 1));
            out(OFF_INCORRECT + s.n_incorrect.min(COUNT_BINS - 1));
        }
        if self.topo.is_answer[v] {
            let k = match s.status {
                AnswerStatus::NotAsked => 0,
                AnswerStatus::AnsweredCorrect => 1,
                AnswerStatus::AnsweredUnknown => 2,
            };
            out(OFF_STATUS + k);
        }
    }

    /// Depth-0 embedding `[static, dialogue]` of a non-User node.
    pub fn encode(&self, v: NodeId) -> Result<Vec<f64>> {
        if v >= self.topo.n_nodes() {
            return Err(Error::Invalid(format!("node {v} has no feature vector")));
        }
        let mut out = vec![0.0; FEATURE_WIDTH];
        self.hot_bits(v, &mut |i| out[i] = 1.0);
        Ok(out)
    }

    pub fn encode_all(&self) -> FeatureMatrix {
        let bits = (0..self.topo.n_nodes())
            .map(|v| {
                let mut b = 0u64;
                self.hot_bits(v, &mut |i| b |= 1 << i);
                b
            })
            .collect();
        FeatureMatrix { bits }
    }

    /// Structured snapshot of nodes, edges and live features.
    pub fn dump(&self, world: Option<&World>) -> GraphDump {
        let topo = &self.topo;
        let nodes = (0..topo.n_nodes())
            .map(|v| {
                let mut hot = Vec::new();
                self.hot_bits(v, &mut |i| hot.push(i));
                hot.sort_unstable();
                NodeDump {
                    node: v,
                    entity: topo.node_entity[v],
                    name: world.map(|w| w.entity(topo.node_entity[v]).name.clone()),
                    item: topo.personal_item(v),
                    answer: topo.is_answer[v],
                    in_neighbors: topo.in_neighbors[v].clone(),
                    hot,
                }
            })
            .collect();
        GraphDump {
            user_node: topo.user_node,
            personal: topo.personal,
            nodes,
            edges: topo.edges.iter().map(|&(a, b, _)| [a, b]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDump {
    pub node: NodeId,
    pub entity: EntityId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub item: Option<Item>,
    pub answer: bool,
    pub in_neighbors: Vec<NodeId>,
    /// Indices of the hot feature bits.
    pub hot: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub user_node: NodeId,
    pub personal: [NodeId; 4],
    pub nodes: Vec<NodeDump>,
    pub edges: Vec<[NodeId; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::fixtures::{tiny_profile, tiny_world};
    use crate::kg::personal_kg;

    fn graph() -> (World, PersonalKg, DialogueGraph) {
        let w = tiny_world();
        let pkg = personal_kg(&w, &tiny_profile());
        let g = build_graph(&pkg).unwrap();
        (w, pkg, g)
    }

    #[test]
    fn width_is_fifty_nine() {
        assert_eq!(FEATURE_WIDTH, 8 + 5 + 8 + 2 + 11 + 11 + 11 + 3);
        assert_eq!(FEATURE_WIDTH, 59);
    }

    #[test]
    fn edges_are_reversed() {
        let (w, pkg, g) = graph();
        let topo = g.topology();
        for t in pkg.all() {
            let h = topo.node_of(t.head).unwrap();
            let tl = topo.node_of(t.tail).unwrap();
            assert!(topo.in_neighbors[h].contains(&tl), "{}", w.entity(t.tail).name);
        }
        // Adjacency pair: both directions between the two answer nodes.
        let f = topo.node_of(7).unwrap();
        let s = topo.node_of(8).unwrap();
        assert!(topo.in_neighbors[f].contains(&s) && topo.in_neighbors[s].contains(&f));
        assert_eq!(topo.in_neighbors[topo.user_node], topo.personal.to_vec());
        assert_eq!(topo.in_neighbors[topo.user_node].len(), 4);
    }

    #[test]
    fn unreversing_edges_recovers_triplets() {
        let (_, pkg, g) = graph();
        let topo = g.topology();
        let mut back: Vec<Triplet> = topo
            .edges
            .iter()
            .map(|&(from, to, t)| {
                assert_eq!(topo.node_entity[from], t.tail);
                assert_eq!(topo.node_entity[to], t.head);
                t
            })
            .collect();
        let mut orig: Vec<Triplet> = pkg.all().copied().collect();
        back.sort();
        orig.sort();
        assert_eq!(back, orig);
        assert_eq!(build_graph(&pkg).unwrap(), g);
    }

    #[test]
    fn rejects_items_with_too_few_askable() {
        let (_, mut pkg, _) = graph();
        let head = pkg.profile.item(Item::BirthPlace);
        let mut dropped = 0;
        pkg.askable.retain(|t| {
            if t.head == head && dropped < 1 {
                dropped += 1;
                false
            } else {
                true
            }
        });
        assert!(build_graph(&pkg).is_err());
    }

    #[test]
    fn fresh_answer_node_encoding() {
        let (_, _, g) = graph();
        let topo = g.topology();
        // FoundedDate tail: in-degree 0 (bucket <=1), freq 30000 -> spread bin 4.
        let year = topo.node_of(10).unwrap();
        let v = g.encode(year).unwrap();
        let hot: Vec<usize> = (0..FEATURE_WIDTH).filter(|&i| v[i] == 1.0).collect();
        assert_eq!(hot, vec![OFF_DEGREE, OFF_TYPE + 4, OFF_SPREAD + 4, OFF_STATUS]);
        // Spread 10^3 lands in the 3-4 bin.
        assert_eq!(spread_bucket(1000.0), 3);
        // Supermarket tail: freq 120 -> bin 2, degree bucket of in-degree 0.
        let market = topo.node_of(4).unwrap();
        let hot: Vec<usize> = {
            let v = g.encode(market).unwrap();
            (0..FEATURE_WIDTH).filter(|&i| v[i] == 1.0).collect()
        };
        assert_eq!(hot, vec![OFF_DEGREE + degree_bucket(1), OFF_TYPE + 4, OFF_SPREAD + 2, OFF_STATUS]);
        assert!(g.encode(topo.user_node).is_err());
    }

    #[test]
    fn buckets() {
        assert_eq!((0..=22).map(degree_bucket).collect::<Vec<_>>(), vec![0, 0, 1, 2, 3, 4, 5, 5, 5, 5, 5, 6, 6, 6, 6, 6, 6, 6, 6, 6, 6, 7, 7]);
        assert_eq!(spread_bucket(9.99), 0);
        assert_eq!(spread_bucket(10.0), 1);
        assert_eq!(spread_bucket(9_999_999.0), 6);
        assert_eq!(spread_bucket(1e7), 7);
        assert_eq!(spread_bucket(1e12), 7);
    }

    #[test]
    fn personal_node_static_features() {
        let (_, _, g) = graph();
        let topo = g.topology();
        let s = g.encode(topo.personal[0]).unwrap();
        assert_eq!(s[OFF_DEGREE + degree_bucket(7)], 1.0);
        assert_eq!(s[OFF_TYPE], 1.0);
        assert!(s[OFF_SPREAD..OFF_SPREAD + SPREAD_BINS].iter().all(|&x| x == 0.0));
        assert!(s[OFF_STATUS..].iter().all(|&x| x == 0.0));
        assert_eq!(s[OFF_TURNS], 1.0);
        assert_eq!(s[OFF_CORRECT], 1.0);
        assert_eq!(s[OFF_INCORRECT], 1.0);
    }

    #[test]
    fn counters_and_last_action() {
        let (_, _, mut g) = graph();
        let topo = g.topology().clone();
        let answers = topo.worker_answers[0].clone();
        g.record_event(DialogueEvent::WorkerSelected { item: Item::School }).unwrap();
        let outcomes = [true, false, true];
        for (&a, &ok) in answers.iter().zip(&outcomes) {
            g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer: a }).unwrap();
            g.record_event(DialogueEvent::AnswerReceived { answer: a, correct: ok }).unwrap();
        }
        let p = g.encode(topo.personal[0]).unwrap();
        assert_eq!(p[OFF_CORRECT + 2], 1.0);
        assert_eq!(p[OFF_INCORRECT + 1], 1.0);
        assert_eq!(p[OFF_TURNS + 3], 1.0);
        assert_eq!(g.answer_status(answers[0]), AnswerStatus::AnsweredCorrect);
        assert_eq!(g.answer_status(answers[1]), AnswerStatus::AnsweredUnknown);
        // Only the latest asked pair carries the last-action bit.
        let lasts: Vec<NodeId> = (0..topo.n_nodes()).filter(|&v| g.encode(v).unwrap()[OFF_LAST] == 1.0).collect();
        assert_eq!(lasts, vec![topo.personal[0], answers[2]]);
        assert_eq!(g.encode(answers[0]).unwrap(), g.encode(answers[0]).unwrap());
    }

    #[test]
    fn rejections() {
        let (_, _, mut g) = graph();
        let topo = g.topology().clone();
        let a = topo.worker_answers[0][0];
        assert!(g.record_event(DialogueEvent::AnswerReceived { answer: a, correct: true }).is_err());
        g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer: a }).unwrap();
        assert!(g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer: topo.worker_answers[0][1] }).is_err());
        g.record_event(DialogueEvent::AnswerReceived { answer: a, correct: false }).unwrap();
        assert!(g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer: a }).is_err());
        let foreign = topo.worker_answers[1][0];
        assert!(g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer: foreign }).is_err());
        g.record_event(DialogueEvent::WorkerSelected { item: Item::Company }).unwrap();
        assert!(g.record_event(DialogueEvent::WorkerSelected { item: Item::Company }).is_err());
    }

    #[test]
    fn eleventh_question_is_rejected() {
        // A school with twelve answer nodes.
        let (_, mut pkg, _) = graph();
        let school = pkg.profile.item(Item::School);
        for k in 0..5u32 {
            pkg.askable.push(Triplet { head: school, relation: 12 + k as u16, tail: 11 + k, freq: 50 });
        }
        let mut g = build_graph(&pkg).unwrap();
        let answers = g.topology().worker_answers[0].clone();
        assert_eq!(answers.len(), 12);
        for &a in &answers[..10] {
            g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer: a }).unwrap();
            g.record_event(DialogueEvent::AnswerReceived { answer: a, correct: false }).unwrap();
        }
        let err = g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer: answers[10] });
        assert!(matches!(err, Err(Error::EventRejected(_))));
        assert_eq!(g.worker_turns(Item::School), 10);
    }

    #[test]
    fn reset_restores_canonical_pattern() {
        let (_, _, mut g) = graph();
        let fresh = g.encode_all();
        let a = g.topology().worker_answers[2][0];
        g.record_event(DialogueEvent::WorkerSelected { item: Item::Residence }).unwrap();
        g.record_event(DialogueEvent::QuestionAsked { item: Item::Residence, answer: a }).unwrap();
        assert_ne!(g.encode_all(), fresh);
        g.reset_dialogue_features();
        assert_eq!(g.encode_all(), fresh);
        g.reset_dialogue_features();
        assert_eq!(g.encode_all(), fresh);
        // Static bits survive reset.
        for v in 0..g.topology().n_nodes() {
            let row = fresh.dense(v);
            assert!(row[OFF_DEGREE..OFF_EXPLORED].iter().sum::<f64>() >= 2.0);
            assert_eq!(row, g.encode(v).unwrap());
        }
    }

    #[test]
    fn dump_lists_every_node() {
        let (w, _, g) = graph();
        let d = g.dump(Some(&w));
        assert_eq!(d.nodes.len(), g.topology().n_nodes());
        assert_eq!(d.nodes[0].name.as_deref(), Some("Lakeside University"));
        let json = serde_json::to_string(&d).unwrap();
        let back: GraphDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
