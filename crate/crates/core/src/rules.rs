//! Rule-based baselines, also used as pre-training teachers.
//!
//! Flat Rule asks ten random questions and says Fraud if fewer were answered
//! correctly than not. Hierarchical Rule visits workers in random order; each
//! asks random questions until its correct and incorrect counts differ by
//! three or it runs out, then says Fraud iff correct < incorrect. The first
//! Fraud verdict ends the dialogue.

use rand::seq::IteratorRandom;
use serde::{Deserialize, Serialize};

use crate::dialogue::DialogueGraph;
use crate::episode::{self, Action, Agent, Controller, Decision, DecisionPoint, Episode, Limits, Mode};
use crate::error::{Error, Result};
use crate::kg::{Item, Triplet};
use crate::rng::{self, Rng};
use crate::simulator::{SimApplicant, SimResponder};

/// Margin that ends a Hierarchical Rule worker.
pub const MARGIN: usize = 3;

fn index_of(dp: &DecisionPoint, action: Action) -> Result<usize> {
    let i = dp
        .index_of(&action)
        .ok_or_else(|| Error::MaskFault(format!("{action:?} is not a candidate")))?;
    if !dp.mask[i] {
        return Err(Error::MaskFault(format!("{action:?} is masked")));
    }
    Ok(i)
}

fn decide(dp: &DecisionPoint, fraud: bool) -> Result<usize> {
    index_of(dp, Action::Decide { decision: Decision::from_fraud(fraud) })
}

fn random_ask(dp: &DecisionPoint, rng: &mut Rng) -> Option<usize> {
    dp.legal().filter(|&i| matches!(dp.candidates[i], Action::Ask { .. })).choose(rng)
}

pub struct HierarchicalRule {
    rng: Rng,
}

impl HierarchicalRule {
    pub fn new(seed: u64) -> Self {
        HierarchicalRule { rng: rng::stream(seed, &[0x4852]) }
    }
}

impl Controller for HierarchicalRule {
    fn choose(&mut self, ep: &Episode, dp: &DecisionPoint) -> Result<usize> {
        match dp.agent {
            Agent::Manager => {
                let verdicts: Vec<Option<Decision>> = Item::ALL.iter().map(|&i| ep.worker_decision(i)).collect();
                if verdicts.contains(&Some(Decision::Fraud)) {
                    return decide(dp, true);
                }
                if verdicts.iter().all(Option::is_some) {
                    return decide(dp, false);
                }
                let selects = dp.legal().filter(|&i| matches!(dp.candidates[i], Action::Select { .. }));
                match selects.choose(&mut self.rng) {
                    Some(i) => Ok(i),
                    // Budget exhausted with workers left.
                    None => decide(dp, false),
                }
            }
            Agent::Worker(item) => {
                let (crt, wrg) = ep.graph().answer_counts(item);
                if crt.abs_diff(wrg) >= MARGIN {
                    return decide(dp, crt < wrg);
                }
                match random_ask(dp, &mut self.rng) {
                    Some(i) => Ok(i),
                    None => decide(dp, crt < wrg),
                }
            }
            Agent::Flat => Err(Error::Invalid("Hierarchical Rule cannot drive a flat episode".into())),
        }
    }
}

pub struct FlatRule {
    rng: Rng,
    /// Questions to ask before deciding.
    pub questions: usize,
}

impl FlatRule {
    pub fn new(seed: u64) -> Self {
        FlatRule { rng: rng::stream(seed, &[0x4652]), questions: Limits::default().flat_min_questions }
    }
}

impl Controller for FlatRule {
    fn choose(&mut self, ep: &Episode, dp: &DecisionPoint) -> Result<usize> {
        if dp.agent != Agent::Flat {
            return Err(Error::Invalid("Flat Rule drives flat episodes only".into()));
        }
        if ep.questions() < self.questions {
            if let Some(i) = random_ask(dp, &mut self.rng) {
                return Ok(i);
            }
        }
        let crt = ep.transcript().iter().filter(|x| x.correct).count();
        let wrg = ep.transcript().len() - crt;
        decide(dp, crt < wrg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleDecision {
    pub decision: Decision,
    /// Per-item verdicts; all empty for Flat Rule.
    pub item_decisions: [Option<Decision>; 4],
    pub questions_asked: usize,
    pub transcript: Vec<(Item, Triplet, bool)>,
}

fn rule_episode(graph: DialogueGraph, mode: Mode, limits: Limits, applicant: &SimApplicant, controller: &mut dyn Controller) -> Result<(Episode, RuleDecision)> {
    let mut ep = Episode::new(graph, mode, limits);
    let out = episode::run(&mut ep, controller, &mut SimResponder { applicant })?;
    let transcript = ep.transcript().iter().map(|x| (x.item, x.triplet, x.correct)).collect();
    let rd = RuleDecision {
        decision: out.decision,
        item_decisions: out.worker_decisions,
        questions_asked: out.questions,
        transcript,
    };
    Ok((ep, rd))
}

pub fn flat_rule_episode(graph: DialogueGraph, applicant: &SimApplicant, seed: u64) -> Result<(Episode, RuleDecision)> {
    rule_episode(graph, Mode::Flat, Limits::default(), applicant, &mut FlatRule::new(seed))
}

pub fn hierarchical_rule_episode(graph: DialogueGraph, applicant: &SimApplicant, seed: u64) -> Result<(Episode, RuleDecision)> {
    rule_episode(graph, Mode::Hierarchical, Limits::default(), applicant, &mut HierarchicalRule::new(seed))
}

/// Flat Rule verdict recounted from a transcript.
pub fn recount_flat(transcript: &[(Item, Triplet, bool)]) -> Decision {
    let crt = transcript.iter().filter(|x| x.2).count();
    Decision::from_fraud(crt < transcript.len() - crt)
}

/// Hierarchical Rule verdicts recounted from a transcript: the worker spans
/// are the maximal runs of one item, each verdict is `crt < wrg` of its run.
/// Fails if a run did not stop where the rule says it must.
pub fn recount_hierarchical(transcript: &[(Item, Triplet, bool)], n_answers: [usize; 4], max_worker_turns: usize) -> Result<RuleDecision> {
    let mut item_decisions = [None; 4];
    let mut i = 0;
    let mut decision = Decision::NonFraud;
    while i < transcript.len() {
        let item = transcript[i].0;
        if item_decisions[item.index()].is_some() {
            return Err(Error::Invalid(format!("{item} was visited twice")));
        }
        let (mut crt, mut wrg) = (0usize, 0usize);
        let mut j = i;
        while j < transcript.len() && transcript[j].0 == item {
            if crt.abs_diff(wrg) >= MARGIN {
                return Err(Error::Invalid(format!("{item} kept asking past the margin")));
            }
            if transcript[j].2 {
                crt += 1;
            } else {
                wrg += 1;
            }
            j += 1;
        }
        let asked = j - i;
        let stopped = crt.abs_diff(wrg) >= MARGIN || asked == n_answers[item.index()] || asked == max_worker_turns;
        if !stopped {
            return Err(Error::Invalid(format!("{item} stopped early after {asked} questions")));
        }
        let d = Decision::from_fraud(crt < wrg);
        item_decisions[item.index()] = Some(d);
        i = j;
        if d == Decision::Fraud {
            decision = Decision::Fraud;
            if i != transcript.len() {
                return Err(Error::Invalid("questions continued after a Fraud verdict".into()));
            }
        }
    }
    if decision == Decision::NonFraud && item_decisions.iter().any(Option::is_none) {
        return Err(Error::Invalid("NonFraud before every worker decided".into()));
    }
    Ok(RuleDecision { decision, item_decisions, questions_asked: transcript.len(), transcript: transcript.to_vec() })
}
