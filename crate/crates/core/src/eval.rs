//! Test-time metrics and policy-analysis statistics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::episode::{self, Action, Agent, Controller, Decision, Episode, Limits, Mode, Outcome};
use crate::error::{Error, Result};
use crate::kg::Item;
use crate::policy::{Policy, PolicyController, Variant};
use crate::rng;
use crate::rules::{FlatRule, HierarchicalRule};
use crate::simulator::{SimConfig, SimResponder};
use crate::training::{Dataset, MetricsRow, TrainConfig, Trainer, Truth};

/// A system under evaluation.
#[derive(Clone, Copy, Debug)]
pub enum System<'p> {
    FlatRule,
    HierarchicalRule,
    Policy(&'p Policy),
}

impl System<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            System::FlatRule => "flat-rule",
            System::HierarchicalRule => "hierarchical-rule",
            System::Policy(p) => p.variant.name(),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            System::FlatRule => Mode::Flat,
            System::HierarchicalRule => Mode::Hierarchical,
            System::Policy(p) => p.variant.mode(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub repeats: usize,
    pub seed: u64,
    pub limits: Limits,
    pub sim: SimConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { repeats: 10, seed: 0, limits: Limits::default(), sim: SimConfig::default() }
    }
}

impl EvalConfig {
    /// Seed of the simulated applicant for `(repeat, profile)`.
    pub fn applicant_seed(&self, repeat: usize, profile: usize) -> u64 {
        rng::derive(self.seed, &[repeat as u64, profile as u64])
    }

    /// Seed of the rule systems' random choices for `(repeat, profile)`.
    pub fn rule_seed(&self, repeat: usize, profile: usize) -> u64 {
        rng::derive(self.seed, &[repeat as u64, profile as u64, 1])
    }
}

/// What is kept of one evaluation episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub profile: usize,
    pub repeat: usize,
    pub truth: Truth,
    pub outcome: Outcome,
    pub actions: Vec<(Agent, Action)>,
    /// Policy distributions at manager steps, in candidate order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manager_probs: Option<Vec<Vec<f64>>>,
}

impl EpisodeRecord {
    pub fn correct(&self) -> bool {
        self.outcome.decision == self.truth.identity
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Fraud applicants flagged as fraud.
    pub true_fraud: usize,
    pub false_fraud: usize,
    pub true_nonfraud: usize,
    pub false_nonfraud: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: Decision, decided: Decision) {
        match (truth, decided) {
            (Decision::Fraud, Decision::Fraud) => self.true_fraud += 1,
            (Decision::NonFraud, Decision::Fraud) => self.false_fraud += 1,
            (Decision::NonFraud, Decision::NonFraud) => self.true_nonfraud += 1,
            (Decision::Fraud, Decision::NonFraud) => self.false_nonfraud += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_fraud + self.false_fraud + self.true_nonfraud + self.false_nonfraud
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_fraud + self.true_nonfraud) as f64 / self.total().max(1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatStats {
    pub accuracy: f64,
    pub avg_turns: f64,
}

/// Labels of the manager curve columns.
pub const CURVE_LABELS: [&str; 5] = ["School", "Company", "Residence", "BirthPlace", "Decide"];

/// Manager choice distributions by decision step (row `s` is step `s + 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManagerCurves {
    pub labels: Vec<String>,
    /// Episodes that reached each step.
    pub counts: Vec<usize>,
    /// Frequency of each choice among the episodes reaching the step.
    pub empirical: Vec<[f64; 5]>,
    /// Mean policy probability of each choice, when probabilities exist.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<[f64; 5]>>,
}

fn curve_column(action: &Action) -> Option<usize> {
    match action {
        Action::Select { item } => Some(item.index()),
        Action::Decide { .. } => Some(4),
        Action::Ask { .. } => None,
    }
}

pub fn manager_action_curves(episodes: &[EpisodeRecord]) -> ManagerCurves {
    let mut counts: Vec<usize> = Vec::new();
    let mut emp: Vec<[f64; 5]> = Vec::new();
    let mut mass: Vec<[f64; 5]> = Vec::new();
    let has_mass = !episodes.is_empty() && episodes.iter().all(|e| e.manager_probs.is_some());
    for e in episodes {
        let manager = e.actions.iter().filter(|(a, _)| *a == Agent::Manager).filter_map(|(_, act)| curve_column(act));
        for (s, col) in manager.enumerate() {
            if counts.len() <= s {
                counts.push(0);
                emp.push([0.0; 5]);
                mass.push([0.0; 5]);
            }
            counts[s] += 1;
            emp[s][col] += 1.0;
            if has_mass {
                let p = &e.manager_probs.as_ref().expect("checked above")[s];
                for (i, col) in mass[s].iter_mut().enumerate().take(4) {
                    *col += p[i];
                }
                mass[s][4] += p[4] + p[5];
            }
        }
    }
    for (s, &n) in counts.iter().enumerate() {
        for c in 0..5 {
            emp[s][c] /= n as f64;
            mass[s][c] /= n as f64;
        }
    }
    ManagerCurves {
        labels: CURVE_LABELS.iter().map(|s| s.to_string()).collect(),
        counts,
        empirical: emp,
        mass: has_mass.then_some(mass),
    }
}

/// `p(RS1|Cond1)` and `p(RS2|Cond2)` with their supporting counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleConsistency {
    pub cond1: usize,
    pub rs1: usize,
    pub cond2: usize,
    pub rs2: usize,
    pub p_rs1_cond1: Option<f64>,
    pub p_rs2_cond2: Option<f64>,
}

/// Cond1: some worker decided Fraud; RS1: the manager's next action is a
/// Fraud verdict. Cond2: all four workers decided NonFraud; RS2: the
/// manager decides NonFraud.
pub fn rule_consistency(episodes: &[EpisodeRecord]) -> RuleConsistency {
    let mut rc = RuleConsistency::default();
    for e in episodes {
        let mut after_fraud = false;
        let mut seen_cond1 = false;
        for (agent, action) in &e.actions {
            match (agent, action) {
                (Agent::Worker(_), Action::Decide { decision: Decision::Fraud }) if !seen_cond1 => {
                    seen_cond1 = true;
                    after_fraud = true;
                    rc.cond1 += 1;
                }
                (Agent::Manager, act) if after_fraud => {
                    after_fraud = false;
                    if *act == (Action::Decide { decision: Decision::Fraud }) {
                        rc.rs1 += 1;
                    }
                }
                _ => {}
            }
        }
        if e.outcome.worker_decisions.iter().all(|d| *d == Some(Decision::NonFraud)) {
            rc.cond2 += 1;
            if e.outcome.decision == Decision::NonFraud {
                rc.rs2 += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    rc.p_rs1_cond1 = ratio(rc.rs1, rc.cond1);
    rc.p_rs2_cond2 = ratio(rc.rs2, rc.cond2);
    rc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub repeats: usize,
    pub episodes: usize,
    pub accuracy: f64,
    /// Mean questions asked per episode.
    pub avg_turns: f64,
    pub per_repeat: Vec<RepeatStats>,
    pub confusion: Confusion,
    /// Fraction of worker verdicts matching their item's truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manager_curves: Option<ManagerCurves>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_consistency: Option<RuleConsistency>,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Plays one evaluation episode; policies act greedily.
pub fn play_one(system: System<'_>, data: &Dataset, profile: usize, repeat: usize, cfg: &EvalConfig) -> Result<(Episode, EpisodeRecord)> {
    let applicant = data.applicant(profile, &cfg.sim, cfg.applicant_seed(repeat, profile));
    let mut ep = Episode::new(data.graph(profile), system.mode(), cfg.limits);
    let mut responder = SimResponder { applicant: &applicant };
    let mut manager_probs = None;
    match system {
        System::FlatRule => {
            episode::run(&mut ep, &mut FlatRule::new(cfg.rule_seed(repeat, profile)), &mut responder)?;
        }
        System::HierarchicalRule => {
            episode::run(&mut ep, &mut HierarchicalRule::new(cfg.rule_seed(repeat, profile)), &mut responder)?;
        }
        System::Policy(p) => {
            let mut c = PolicyController::greedy(p).recording();
            episode::run(&mut ep, &mut c as &mut dyn Controller, &mut responder)?;
            if ep.mode() == Mode::Hierarchical {
                let h = c.history.unwrap_or_default();
                manager_probs = Some(h.into_iter().filter(|(a, _)| *a == Agent::Manager).map(|(_, p)| p).collect());
            }
        }
    }
    let outcome = ep.outcome().ok_or_else(|| Error::Invalid("episode ended without a decision".into()))?;
    let record = EpisodeRecord {
        profile,
        repeat,
        truth: Truth::of(&applicant),
        outcome,
        actions: ep.steps().iter().map(|s| (s.agent, s.action)).collect(),
        manager_probs,
    };
    Ok((ep, record))
}

/// All `(repeat, profile)` episodes, repeat-major.
pub fn evaluate_episodes(system: System<'_>, data: &Dataset, profiles: &[usize], cfg: &EvalConfig) -> Result<Vec<EpisodeRecord>> {
    let mut out = Vec::with_capacity(cfg.repeats * profiles.len());
    for r in 0..cfg.repeats {
        for &i in profiles {
            out.push(play_one(system, data, i, r, cfg)?.1);
        }
    }
    Ok(out)
}

pub fn summarize(system: &str, mode: Mode, repeats: usize, episodes: &[EpisodeRecord]) -> EvalReport {
    let mut confusion = Confusion::default();
    let mut per_repeat = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let eps: Vec<&EpisodeRecord> = episodes.iter().filter(|e| e.repeat == r).collect();
        let n = eps.len().max(1) as f64;
        per_repeat.push(RepeatStats {
            accuracy: eps.iter().filter(|e| e.correct()).count() as f64 / n,
            avg_turns: eps.iter().map(|e| e.outcome.questions).sum::<usize>() as f64 / n,
        });
    }
    let mut verdicts = 0usize;
    let mut right = 0usize;
    for e in episodes {
        confusion.add(e.truth.identity, e.outcome.decision);
        for item in Item::ALL {
            if let Some(d) = e.outcome.worker_decisions[item.index()] {
                verdicts += 1;
                right += usize::from(d == e.truth.items[item.index()]);
            }
        }
    }
    let n = episodes.len().max(1) as f64;
    let hierarchical = mode == Mode::Hierarchical;
    EvalReport {
        system: system.to_string(),
        repeats,
        episodes: episodes.len(),
        accuracy: confusion.accuracy(),
        avg_turns: episodes.iter().map(|e| e.outcome.questions).sum::<usize>() as f64 / n,
        per_repeat,
        confusion,
        worker_accuracy: (hierarchical && verdicts > 0).then(|| right as f64 / verdicts as f64),
        manager_curves: hierarchical.then(|| manager_action_curves(episodes)),
        rule_consistency: hierarchical.then(|| rule_consistency(episodes)),
    }
}

pub fn evaluate(system: System<'_>, data: &Dataset, profiles: &[usize], cfg: &EvalConfig) -> Result<EvalReport> {
    let eps = evaluate_episodes(system, data, profiles, cfg)?;
    Ok(summarize(system.name(), system.mode(), cfg.repeats, &eps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    pub accuracy: f64,
    pub avg_turns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<SystemRow>,
    pub reports: Vec<EvalReport>,
    /// Training logs of the neural variants.
    pub curves: Vec<(Variant, Vec<MetricsRow>)>,
}

impl AblationReport {
    pub fn row(&self, system: &str) -> Option<&SystemRow> {
        self.rows.iter().find(|r| r.system == system)
    }

    /// One row per system: `system,accuracy,avg_turns`.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Invalid(e.to_string()))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// One row per (variant, epoch) with the metrics columns.
    pub fn curves_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let mut header = vec!["variant".to_string()];
        header.extend(MetricsRow::COLUMNS.iter().map(|s| s.to_string()));
        w.write_record(&header).map_err(|e| Error::Invalid(e.to_string()))?;
        for (v, rows) in &self.curves {
            for r in rows {
                let mut rec = vec![v.name().to_string()];
                rec.extend(r.record());
                w.write_record(&rec).map_err(|e| Error::Invalid(e.to_string()))?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?).map_err(|e| Error::Invalid(e.to_string()))
    }
}

/// Trains the three neural variants and evaluates all five systems on the
/// test split.
pub fn ablation_suite(data: &Dataset, train: &TrainConfig, eval: &EvalConfig, seed: u64, mut progress: impl FnMut(Variant, &MetricsRow)) -> Result<AblationReport> {
    let mut reports = vec![
        evaluate(System::FlatRule, data, &data.split.test, eval)?,
        evaluate(System::HierarchicalRule, data, &data.split.test, eval)?,
    ];
    let mut curves = Vec::new();
    for v in [Variant::MpS, Variant::HpS, Variant::FullS] {
        let mut t = Trainer::new(data, train.clone(), v, seed)?;
        t.run(|row| progress(v, row))?;
        let best = t.best_policy().clone();
        reports.push(evaluate(System::Policy(&best), data, &data.split.test, eval)?);
        curves.push((v, t.log().to_vec()));
    }
    let rows = reports.iter().map(|r| SystemRow { system: r.system.clone(), accuracy: r.accuracy, avg_turns: r.avg_turns }).collect();
    Ok(AblationReport { rows, reports, curves })
}
