//! The dialogue state machine shared by neural policies, rule baselines,
//! training rollouts and live sessions.
//!
//! An [`Episode`] alternates between decision points, where a controller picks
//! one of the masked candidates, and pending questions, which a responder answers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dialogue::{DialogueEvent, DialogueGraph, FeatureMatrix, NodeId, Topology, WORKER_TURN_CAP};
use crate::error::{Error, Result};
use crate::kg::{Item, Triplet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Fraud,
    NonFraud,
}

impl Decision {
    pub const ALL: [Decision; 2] = [Decision::Fraud, Decision::NonFraud];

    pub fn from_fraud(fraud: bool) -> Self {
        if fraud {
            Decision::Fraud
        } else {
            Decision::NonFraud
        }
    }

    pub fn is_fraud(self) -> bool {
        self == Decision::Fraud
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Fraud => "Fraud",
            Decision::NonFraud => "NonFraud",
        })
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "fraud" => Ok(Decision::Fraud),
            "nonfraud" => Ok(Decision::NonFraud),
            _ => Err(Error::Invalid(format!("unknown decision `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Manager picks workers, workers pick questions.
    #[default]
    Hierarchical,
    /// One agent picks answer nodes directly.
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "agent", content = "item", rename_all = "snake_case")]
pub enum Agent {
    Manager,
    Worker(Item),
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Select { item: Item },
    Ask { item: Item, answer: NodeId },
    Decide { decision: Decision },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_system_turns: usize,
    pub max_worker_turns: usize,
    /// Questions a worker must ask before deciding (fewer if it runs out).
    pub min_worker_questions: usize,
    /// Questions the flat agent must ask before deciding.
    pub flat_min_questions: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_system_turns: 40, max_worker_turns: WORKER_TURN_CAP, min_worker_questions: 3, flat_min_questions: 10 }
    }
}

impl Limits {
    pub fn check(&self) -> Result<()> {
        if self.max_system_turns == 0 || self.max_worker_turns == 0 || self.max_worker_turns > WORKER_TURN_CAP {
            return Err(Error::Invalid(format!("invalid turn limits {self:?}")));
        }
        Ok(())
    }
}

/// Candidates of the agent to move and which of them are legal.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionPoint {
    pub agent: Agent,
    pub candidates: Vec<Action>,
    pub mask: Vec<bool>,
}

impl DecisionPoint {
    pub fn legal(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn index_of(&self, action: &Action) -> Option<usize> {
        self.candidates.iter().position(|a| a == action)
    }
}

/// One applied decision, with the state it was taken in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub agent: Agent,
    pub features: FeatureMatrix,
    pub mask: Vec<bool>,
    pub chosen: usize,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub item: Item,
    pub answer: NodeId,
    pub triplet: Triplet,
    pub correct: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Manager,
    Worker(Item),
    Flat,
    Awaiting { item: Item, answer: NodeId, worker: bool },
    Done(Decision),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub decision: Decision,
    pub worker_decisions: [Option<Decision>; 4],
    pub questions: usize,
}

#[derive(Clone, Debug)]
pub struct Episode {
    graph: DialogueGraph,
    mode: Mode,
    limits: Limits,
    phase: Phase,
    worker_decisions: [Option<Decision>; 4],
    /// Workers in the order the manager selected them.
    worker_order: Vec<Item>,
    questions: usize,
    steps: Vec<StepRecord>,
    transcript: Vec<Exchange>,
}

impl Episode {
    pub fn new(mut graph: DialogueGraph, mode: Mode, limits: Limits) -> Self {
        graph.reset_dialogue_features();
        Episode {
            graph,
            mode,
            limits,
            phase: match mode {
                Mode::Hierarchical => Phase::Manager,
                Mode::Flat => Phase::Flat,
            },
            worker_decisions: [None; 4],
            worker_order: Vec::new(),
            questions: 0,
            steps: Vec::new(),
            transcript: Vec::new(),
        }
    }

    pub fn graph(&self) -> &DialogueGraph {
        &self.graph
    }

    pub fn topology(&self) -> &Topology {
        self.graph.topology()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn questions(&self) -> usize {
        self.questions
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn transcript(&self) -> &[Exchange] {
        &self.transcript
    }

    pub fn worker_decision(&self, item: Item) -> Option<Decision> {
        self.worker_decisions[item.index()]
    }

    pub fn worker_order(&self) -> &[Item] {
        &self.worker_order
    }

    /// The worker currently in control, if any.
    pub fn active_worker(&self) -> Option<Item> {
        match self.phase {
            Phase::Worker(i) => Some(i),
            Phase::Awaiting { item, worker: true, .. } => Some(item),
            _ => None,
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self.phase, Phase::Done(_))
    }

    pub fn outcome(&self) -> Option<Outcome> {
        match self.phase {
            Phase::Done(decision) => Some(Outcome {
                decision,
                worker_decisions: self.worker_decisions,
                questions: self.questions,
            }),
            _ => None,
        }
    }

    pub fn budget_left(&self) -> bool {
        self.questions < self.limits.max_system_turns
    }

    /// The question awaiting an answer.
    pub fn pending(&self) -> Option<(Item, NodeId, Triplet)> {
        match self.phase {
            Phase::Awaiting { item, answer, .. } => Some((item, answer, self.topology().askable[&(item, answer)])),
            _ => None,
        }
    }

    fn can_ask(&self, item: Item, answer: NodeId) -> bool {
        self.budget_left()
            && !self.graph.is_asked(item, answer)
            && self.graph.worker_turns(item) < self.limits.max_worker_turns
    }

    pub fn decision_point(&self) -> Option<DecisionPoint> {
        let topo = self.topology();
        let decisions = Decision::ALL.map(|decision| Action::Decide { decision });
        match self.phase {
            Phase::Manager => {
                let mut candidates: Vec<Action> = Item::ALL.iter().map(|&item| Action::Select { item }).collect();
                candidates.extend(decisions);
                let budget = self.budget_left();
                let mut mask: Vec<bool> = Item::ALL.iter().map(|i| budget && self.worker_decisions[i.index()].is_none()).collect();
                let all_decided = self.worker_decisions.iter().all(Option::is_some);
                let any_fraud = self.worker_decisions.contains(&Some(Decision::Fraud));
                let decide = all_decided || any_fraud || !budget;
                if !budget {
                    mask.iter_mut().for_each(|m| *m = false);
                }
                mask.extend([decide, decide]);
                Some(DecisionPoint { agent: Agent::Manager, candidates, mask })
            }
            Phase::Worker(item) => {
                let answers = &topo.worker_answers[item.index()];
                let mut candidates: Vec<Action> = answers.iter().map(|&answer| Action::Ask { item, answer }).collect();
                let mut mask: Vec<bool> = answers.iter().map(|&a| self.can_ask(item, a)).collect();
                let asked = self.graph.asked_count(item);
                let need = self.limits.min_worker_questions.min(answers.len());
                let decide = asked >= need || !mask.iter().any(|&m| m);
                candidates.extend(decisions);
                mask.extend([decide, decide]);
                Some(DecisionPoint { agent: Agent::Worker(item), candidates, mask })
            }
            Phase::Flat => {
                let mut candidates: Vec<Action> =
                    topo.askable.keys().map(|&(item, answer)| Action::Ask { item, answer }).collect();
                let mut mask: Vec<bool> = topo.askable.keys().map(|&(i, a)| self.can_ask(i, a)).collect();
                let decide = self.questions >= self.limits.flat_min_questions || !mask.iter().any(|&m| m);
                candidates.extend(decisions);
                mask.extend([decide, decide]);
                Some(DecisionPoint { agent: Agent::Flat, candidates, mask })
            }
            Phase::Awaiting { .. } | Phase::Done(_) => None,
        }
    }

    /// Applies candidate `index` of the current decision point.
    pub fn apply(&mut self, index: usize) -> Result<Action> {
        let dp = self
            .decision_point()
            .ok_or_else(|| Error::EventRejected("no decision is due".into()))?;
        if !dp.mask.iter().any(|&m| m) {
            return Err(Error::MaskFault(format!("{:?} has no legal action", dp.agent)));
        }
        if index >= dp.candidates.len() || !dp.mask[index] {
            return Err(Error::MaskFault(format!("{:?} chose masked candidate {index}", dp.agent)));
        }
        let action = dp.candidates[index];
        self.steps.push(StepRecord {
            agent: dp.agent,
            features: self.graph.encode_all(),
            mask: dp.mask,
            chosen: index,
            action,
        });
        match (self.phase, action) {
            (Phase::Manager, Action::Select { item }) => {
                self.graph.record_event(DialogueEvent::WorkerSelected { item })?;
                self.worker_order.push(item);
                self.phase = Phase::Worker(item);
            }
            (Phase::Worker(_) | Phase::Flat, Action::Ask { item, answer }) => {
                self.graph.record_event(DialogueEvent::QuestionAsked { item, answer })?;
                self.questions += 1;
                let worker = matches!(self.phase, Phase::Worker(_));
                self.phase = Phase::Awaiting { item, answer, worker };
            }
            (Phase::Worker(item), Action::Decide { decision }) => {
                self.worker_decisions[item.index()] = Some(decision);
                self.phase = Phase::Manager;
            }
            (Phase::Manager | Phase::Flat, Action::Decide { decision }) => {
                self.phase = Phase::Done(decision);
            }
            (phase, action) => unreachable!("{action:?} offered in {phase:?}"),
        }
        Ok(action)
    }

    /// Records the applicant's answer to the pending question.
    pub fn answer(&mut self, correct: bool) -> Result<()> {
        let Phase::Awaiting { item, answer, worker } = self.phase else {
            return Err(Error::EventRejected("no question is pending".into()));
        };
        self.graph.record_event(DialogueEvent::AnswerReceived { answer, correct })?;
        let triplet = self.topology().askable[&(item, answer)];
        self.transcript.push(Exchange { item, answer, triplet, correct });
        self.phase = if worker { Phase::Worker(item) } else { Phase::Flat };
        Ok(())
    }
}

/// Picks an action at a decision point.
pub trait Controller {
    fn choose(&mut self, episode: &Episode, dp: &DecisionPoint) -> Result<usize>;
}

/// Answers asked triplets; `true` means the correct option was chosen.
pub trait Responder {
    fn respond(&mut self, item: Item, triplet: &Triplet) -> Result<bool>;
}

/// Replays recorded answers in order.
pub struct ScriptedResponder {
    answers: std::vec::IntoIter<bool>,
}

impl ScriptedResponder {
    pub fn new(answers: Vec<bool>) -> Self {
        ScriptedResponder { answers: answers.into_iter() }
    }
}

impl Responder for ScriptedResponder {
    fn respond(&mut self, _item: Item, _triplet: &Triplet) -> Result<bool> {
        self.answers
            .next()
            .ok_or_else(|| Error::Invalid("scripted transcript ran out of answers".into()))
    }
}

/// Advances the episode until the next pending question or the end.
pub fn advance(episode: &mut Episode, controller: &mut dyn Controller) -> Result<()> {
    while let Some(dp) = episode.decision_point() {
        let idx = controller.choose(episode, &dp)?;
        episode.apply(idx)?;
    }
    Ok(())
}

/// Runs an episode to completion.
pub fn run(episode: &mut Episode, controller: &mut dyn Controller, responder: &mut dyn Responder) -> Result<Outcome> {
    loop {
        advance(episode, controller)?;
        match episode.pending() {
            Some((item, _, triplet)) => {
                let ok = responder.respond(item, &triplet)?;
                episode.answer(ok)?;
            }
            None => break,
        }
    }
    episode.outcome().ok_or_else(|| Error::Invalid("episode stopped without a decision".into()))
}

/// Checks every recorded decision of a finished hierarchical episode against
/// the worker and manager rules; returns a description of the first violation.
pub fn audit(episode: &Episode) -> Option<String> {
    let limits = episode.limits();
    let mut asked = [0usize; 4];
    let mut decided: [Option<Decision>; 4] = [None; 4];
    let mut questions = 0;
    let n_answers = |i: Item| episode.topology().worker_answers[i.index()].len();
    for (k, s) in episode.steps().iter().enumerate() {
        if !s.mask[s.chosen] {
            return Some(format!("step {k}: masked action taken"));
        }
        match (s.agent, s.action) {
            (Agent::Worker(i), Action::Decide { decision }) => {
                let need = limits.min_worker_questions.min(n_answers(i));
                let forced = asked[i.index()] >= limits.max_worker_turns || questions >= limits.max_system_turns;
                if asked[i.index()] < need && !forced {
                    return Some(format!("step {k}: {i} decided after {} questions", asked[i.index()]));
                }
                decided[i.index()] = Some(decision);
            }
            (Agent::Worker(i), Action::Ask { .. }) | (Agent::Flat, Action::Ask { item: i, .. }) => {
                asked[i.index()] += 1;
                questions += 1;
                if asked[i.index()] > limits.max_worker_turns || questions > limits.max_system_turns {
                    return Some(format!("step {k}: turn cap exceeded"));
                }
            }
            (Agent::Manager, Action::Decide { .. }) => {
                let ok = decided.iter().all(Option::is_some)
                    || decided.contains(&Some(Decision::Fraud))
                    || questions >= limits.max_system_turns;
                if !ok {
                    return Some(format!("step {k}: manager decided early"));
                }
            }
            (Agent::Manager, Action::Select { item }) => {
                if decided[item.index()].is_some() {
                    return Some(format!("step {k}: reselected {item}"));
                }
            }
            (Agent::Flat, Action::Decide { .. }) => {
                let left = episode.topology().askable.len() > questions;
                if questions < limits.flat_min_questions && left && questions < limits.max_system_turns {
                    let any_legal = s.mask[..s.mask.len() - 2].iter().any(|&m| m);
                    if any_legal {
                        return Some(format!("step {k}: flat agent decided after {questions} questions"));
                    }
                }
            }
            (agent, action) => return Some(format!("step {k}: {agent:?} cannot take {action:?}")),
        }
    }
    None
}
