//! A live dialogue between a greedy policy and a human applicant.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::episode::{self, Action, Agent, Decision, Episode, Limits, Outcome, ScriptedResponder};
use crate::error::{Error, Result};
use crate::kg::{render_question, Item, Label, Question, Triplet};
use crate::policy::{argmax, distribution, manager_labels, Policy, PolicyController};
use crate::rng;
use crate::training::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingAnswer,
    Finished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    /// 1-based question number.
    pub number: usize,
    pub item: Item,
    pub text: String,
    /// Options A to D, in label order.
    pub options: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub number: usize,
    pub item: Item,
    pub text: String,
    pub options: Vec<String>,
    pub answer: Label,
    pub correct: bool,
    pub triplet: Triplet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemVerdict {
    pub item: Item,
    pub decision: Option<Decision>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultView {
    pub decision: Decision,
    pub item_decisions: Vec<ItemVerdict>,
    pub questions_asked: usize,
    pub transcript: Vec<Turn>,
}

/// The policy's distribution at one decision point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub agent: Agent,
    pub candidates: Vec<String>,
    pub probabilities: Vec<f64>,
    pub chosen: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: Status,
    pub profile: usize,
    pub applicant_id: u32,
    /// Items the player was asked to pretend are theirs.
    pub fake_items: Vec<Item>,
    pub questions_asked: usize,
    pub max_questions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question: Option<QuestionView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Probe>>,
}

pub struct Session {
    id: String,
    profile: usize,
    fake_items: Vec<Item>,
    data: Arc<Dataset>,
    policy: Arc<Policy>,
    episode: Episode,
    question_seed: u64,
    pending: Option<(Item, Question)>,
    transcript: Vec<Turn>,
    probes: Vec<Probe>,
}

fn describe(action: &Action) -> String {
    match action {
        Action::Select { item } => format!("select {item}"),
        Action::Ask { item, answer } => format!("ask {item} node {answer}"),
        Action::Decide { decision } => decision.to_string(),
    }
}

impl Session {
    /// Starts a session and runs the policy up to its first question.
    pub fn start(id: String, data: Arc<Dataset>, policy: Arc<Policy>, profile: usize, fake_items: Vec<Item>, seed: u64) -> Result<Self> {
        if profile >= data.len() {
            return Err(Error::Invalid(format!("profile {profile} out of range (0..{})", data.len())));
        }
        let episode = Episode::new(data.graph(profile), policy.variant.mode(), Limits::default());
        let mut s = Session {
            id,
            profile,
            fake_items,
            data,
            policy,
            episode,
            question_seed: seed,
            pending: None,
            transcript: Vec::new(),
            probes: Vec::new(),
        };
        s.advance()?;
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> Status {
        if self.episode.is_done() {
            Status::Finished
        } else {
            Status::AwaitingAnswer
        }
    }

    /// Correctness of every answer so far, in order.
    pub fn answers(&self) -> Vec<bool> {
        self.transcript.iter().map(|t| t.correct).collect()
    }

    pub fn profile(&self) -> usize {
        self.profile
    }

    fn advance(&mut self) -> Result<()> {
        loop {
            if let Some((item, _, triplet)) = self.episode.pending() {
                let seed = rng::derive(self.question_seed, &[self.transcript.len() as u64]);
                let q = render_question(&self.data.world, &triplet, seed)?;
                self.pending = Some((item, q));
                return Ok(());
            }
            let Some(dp) = self.episode.decision_point() else {
                return Ok(());
            };
            let feats = self.episode.graph().encode_all();
            let probs = distribution(&self.policy, self.episode.topology(), &feats, dp.agent, &dp.mask)?;
            let chosen = argmax(&probs, &dp.mask)?;
            let candidates = if dp.agent == Agent::Manager {
                manager_labels().iter().map(|s| s.to_string()).collect()
            } else {
                dp.candidates.iter().map(describe).collect()
            };
            self.probes.push(Probe { agent: dp.agent, candidates, probabilities: probs, chosen });
            self.episode.apply(chosen)?;
        }
    }

    pub fn question(&self) -> Option<QuestionView> {
        self.pending.as_ref().map(|(item, q)| QuestionView {
            number: self.transcript.len() + 1,
            item: *item,
            text: q.text.clone(),
            options: q.options.to_vec(),
        })
    }

    /// Records an answer; anything but the correct label, including D, counts as wrong.
    pub fn answer(&mut self, label: Label) -> Result<()> {
        let Some((item, q)) = self.pending.take() else {
            return Err(Error::Conflict("no question is pending".into()));
        };
        let correct = label == q.correct_label;
        self.episode.answer(correct)?;
        self.transcript.push(Turn {
            number: self.transcript.len() + 1,
            item,
            text: q.text,
            options: q.options.to_vec(),
            answer: label,
            correct,
            triplet: q.triplet,
        });
        self.advance()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.episode.outcome()
    }

    pub fn result(&self) -> Option<ResultView> {
        self.episode.outcome().map(|o| ResultView {
            decision: o.decision,
            item_decisions: Item::ALL.iter().map(|&item| ItemVerdict { item, decision: o.worker_decisions[item.index()] }).collect(),
            questions_asked: o.questions,
            transcript: self.transcript.clone(),
        })
    }

    pub fn view(&self, inspect: bool) -> SessionView {
        SessionView {
            session_id: self.id.clone(),
            status: self.status(),
            profile: self.profile,
            applicant_id: self.data.profiles[self.profile].applicant_id,
            fake_items: self.fake_items.clone(),
            questions_asked: self.transcript.len(),
            max_questions: Limits::default().max_system_turns,
            question: self.question(),
            result: self.result(),
            probes: inspect.then(|| self.probes.clone()),
        }
    }
}

/// Replays answer correctness through a greedy episode.
pub fn replay(policy: &Policy, data: &Dataset, profile: usize, answers: &[bool]) -> Result<Outcome> {
    let mut ep = Episode::new(data.graph(profile), policy.variant.mode(), Limits::default());
    let mut c = PolicyController::greedy(policy);
    let mut r = ScriptedResponder::new(answers.to_vec());
    episode::run(&mut ep, &mut c, &mut r)
}
