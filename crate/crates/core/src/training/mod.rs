//! Rewards, supervised pre-training, policy-gradient updates and the
//! epoch loop with dev evaluation and checkpoints.

mod data;
mod rewards;
mod rollout;
mod update;


use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use data::Dataset;
pub use rewards::*;
pub use rollout::{play, run_episode, Driver};
pub use update::{accumulate, pretrain, reinforce_update, update, LossStats, Objective};

use crate::episode::Limits;
use crate::error::{Error, Result};
use crate::eval::{self, EvalConfig, System};
use crate::nn::{Checkpoint, OptimConfig, Optimizer, TensorRecord};
use crate::policy::{Policy, PolicyConfig, Variant};
use crate::rng;
use crate::simulator::SimConfig;

// Seed streams.
const S_INIT: u64 = 0;
const S_APPLICANT: u64 = 1;
const S_DEV: u64 = 2;
const S_TEACHER: u64 = 4;
const S_ROLLOUT: u64 = 5;
const S_SHUFFLE: u64 = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_applicants: usize,
    pub sl_epochs: usize,
    pub rl_epochs: usize,
    /// Passes over the dev split per epoch evaluation.
    pub dev_repeats: usize,
    /// Passes over the test split in final evaluation.
    pub eval_repeats: usize,
    pub limits: Limits,
    pub policy: PolicyConfig,
    pub optim: OptimConfig,
    /// Step-size multiplier during the RL phase.
    pub rl_lr_scale: f64,
    pub rewards: RewardConfig,
    pub sim: SimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_applicants: 32,
            sl_epochs: 20,
            rl_epochs: 300,
            dev_repeats: 2,
            eval_repeats: 10,
            limits: Limits::default(),
            policy: PolicyConfig::default(),
            optim: OptimConfig::default(),
            rl_lr_scale: 0.3,
            rewards: RewardConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.rl_lr_scale > 0.0 && self.rl_lr_scale.is_finite()) {
            return Err(Error::Invalid("rl_lr_scale must be positive".into()));
        }
        if self.batch_applicants == 0 || self.dev_repeats == 0 || self.eval_repeats == 0 {
            return Err(Error::Invalid("batch size and repeat counts must be positive".into()));
        }
        self.limits.check()?;
        self.optim.check()?;
        self.rewards.check()?;
        self.sim.check()
    }

    pub fn epochs(&self) -> usize {
        self.sl_epochs + self.rl_epochs
    }

    pub fn dev_eval(&self, seed: u64) -> EvalConfig {
        EvalConfig { repeats: self.dev_repeats, seed: rng::derive(seed, &[S_DEV]), limits: self.limits, sim: self.sim.clone() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[default]
    Sl,
    Rl,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Sl => "sl",
            Phase::Rl => "rl",
        }
    }
}

/// One metrics-log record per epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// 1-based.
    pub epoch: usize,
    pub phase: Phase,
    pub dev_accuracy: f64,
    pub dev_avg_turns: f64,
    /// Accuracy of the episodes trained on (teacher's in SL, sampled in RL).
    pub train_accuracy: f64,
    pub train_avg_turns: f64,
    /// Mean per step: cross-entropy in SL, `-(R - V) log pi` in RL.
    pub policy_loss: f64,
    /// Mean per step of `(V - R)^2 / 2`.
    pub value_loss: f64,
    /// Fraction of steps where the recorded action is the policy's argmax.
    pub agreement: f64,
    pub grad_norm_policy: f64,
    pub grad_norm_value: f64,
}

impl MetricsRow {
    pub const COLUMNS: [&'static str; 11] = [
        "epoch",
        "phase",
        "dev_accuracy",
        "dev_avg_turns",
        "train_accuracy",
        "train_avg_turns",
        "policy_loss",
        "value_loss",
        "agreement",
        "grad_norm_policy",
        "grad_norm_value",
    ];

    pub fn record(&self) -> Vec<String> {
        let f = |x: f64| format!("{x}");
        vec![
            self.epoch.to_string(),
            self.phase.name().to_string(),
            f(self.dev_accuracy),
            f(self.dev_avg_turns),
            f(self.train_accuracy),
            f(self.train_avg_turns),
            f(self.policy_loss),
            f(self.value_loss),
            f(self.agreement),
            f(self.grad_norm_policy),
            f(self.grad_norm_value),
        ]
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let bad = |e: csv::Error| Error::Invalid(e.to_string());
    w.write_record(MetricsRow::COLUMNS).map_err(bad)?;
    for r in rows {
        w.write_record(r.record()).map_err(bad)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn load_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::parse(path, e))).collect()
}

/// The rule a variant imitates during pre-training.
pub fn teacher_of(variant: Variant) -> Driver<'static> {
    match variant {
        Variant::MpS => Driver::FlatRule,
        _ => Driver::HierarchicalRule,
    }
}

pub fn teacher_system(variant: Variant) -> System<'static> {
    match variant {
        Variant::MpS => System::FlatRule,
        _ => System::HierarchicalRule,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainerState {
    variant: Variant,
    seed: u64,
    config: TrainConfig,
    epochs_done: usize,
    log: Vec<MetricsRow>,
    best_epoch: usize,
    best_dev_accuracy: f64,
    best_dev_avg_turns: f64,
    best_tensors: Vec<TensorRecord>,
    teacher_dev_accuracy: f64,
    teacher_dev_avg_turns: f64,
}

/// The epoch loop for one variant.
pub struct Trainer<'d> {
    data: &'d Dataset,
    cfg: TrainConfig,
    variant: Variant,
    seed: u64,
    policy: Policy,
    best: Policy,
    opt: Optimizer,
    log: Vec<MetricsRow>,
    best_epoch: usize,
    best_dev: (f64, f64),
    teacher_dev: (f64, f64),
    out_dir: Option<PathBuf>,
}

impl<'d> Trainer<'d> {
    pub fn new(data: &'d Dataset, cfg: TrainConfig, variant: Variant, seed: u64) -> Result<Self> {
        cfg.check()?;
        if data.split.train.is_empty() || data.split.dev.is_empty() {
            return Err(Error::Invalid("training needs non-empty train and dev splits".into()));
        }
        let policy = Policy::new(variant, cfg.policy.clone(), rng::derive(seed, &[S_INIT]));
        let opt = Optimizer::new(cfg.optim.clone(), &policy.params, Policy::group_of);
        let teacher = eval::evaluate(teacher_system(variant), data, &data.split.dev, &cfg.dev_eval(seed))?;
        Ok(Trainer {
            data,
            best: policy.clone(),
            policy,
            opt,
            log: Vec::new(),
            best_epoch: 0,
            best_dev: (f64::NEG_INFINITY, f64::INFINITY),
            teacher_dev: (teacher.accuracy, teacher.avg_turns),
            cfg,
            variant,
            seed,
            out_dir: None,
        })
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(data: &'d Dataset, ck: &Checkpoint) -> Result<Self> {
        let st: TrainerState = serde_json::from_value(ck.meta["trainer"].clone())
            .map_err(|e| Error::Checkpoint(format!("not a training checkpoint: {e}")))?;
        st.config.check()?;
        let policy = Policy::from_checkpoint(ck)?;
        let mut best = policy.clone();
        Checkpoint { tensors: st.best_tensors, ..ck.clone() }.restore_into(&mut best.params)?;
        let mut opt = Optimizer::new(st.config.optim.clone(), &policy.params, Policy::group_of);
        if let Some(s) = &ck.optimizer {
            opt.set_state(s.clone())?;
        }
        Ok(Trainer {
            data,
            cfg: st.config,
            variant: st.variant,
            seed: st.seed,
            policy,
            best,
            opt,
            log: st.log,
            best_epoch: st.best_epoch,
            best_dev: (st.best_dev_accuracy, st.best_dev_avg_turns),
            teacher_dev: (st.teacher_dev_accuracy, st.teacher_dev_avg_turns),
            out_dir: None,
        })
    }

    /// Writes `last.ckpt`, `best.ckpt` and `metrics.csv` there after every epoch.
    pub fn with_output(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }

    /// Changes the RL schedule length, e.g. to extend a resumed run.
    pub fn set_rl_epochs(&mut self, rl_epochs: usize) -> Result<()> {
        if self.cfg.sl_epochs + rl_epochs < self.log.len() {
            return Err(Error::Invalid(format!("{} epochs already ran", self.log.len())));
        }
        self.cfg.rl_epochs = rl_epochs;
        Ok(())
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn best_policy(&self) -> &Policy {
        &self.best
    }

    pub fn log(&self) -> &[MetricsRow] {
        &self.log
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epochs_done(&self) -> usize {
        self.log.len()
    }

    pub fn is_finished(&self) -> bool {
        self.log.len() >= self.cfg.epochs()
    }

    /// 1-based epoch of the best dev accuracy so far.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_dev(&self) -> (f64, f64) {
        self.best_dev
    }

    /// Dev accuracy and turns of the pre-training teacher.
    pub fn teacher_dev(&self) -> (f64, f64) {
        self.teacher_dev
    }

    /// The training state, resumable with [`Trainer::resume`].
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let st = TrainerState {
            variant: self.variant,
            seed: self.seed,
            config: self.cfg.clone(),
            epochs_done: self.log.len(),
            log: self.log.clone(),
            best_epoch: self.best_epoch,
            best_dev_accuracy: self.best_dev.0,
            best_dev_avg_turns: self.best_dev.1,
            best_tensors: Checkpoint::capture(&self.best.params, serde_json::Value::Null, None).tensors,
            teacher_dev_accuracy: self.teacher_dev.0,
            teacher_dev_avg_turns: self.teacher_dev.1,
        };
        let mut meta = self.policy.checkpoint_meta();
        meta["trainer"] = serde_json::to_value(st)?;
        Ok(Checkpoint::capture(&self.policy.params, meta, Some(self.opt.state().clone())))
    }

    /// The best policy as a plain checkpoint.
    pub fn best_checkpoint(&self) -> Checkpoint {
        let mut meta = self.best.checkpoint_meta();
        meta["epoch"] = self.best_epoch.into();
        meta["dev_accuracy"] = self.best_dev.0.into();
        meta["seed"] = self.seed.into();
        Checkpoint::capture(&self.best.params, meta, None)
    }

    /// Runs one epoch and returns its metrics row.
    pub fn run_epoch(&mut self) -> Result<&MetricsRow> {
        let epoch = self.log.len();
        if epoch >= self.cfg.epochs() {
            return Err(Error::Invalid("training already finished".into()));
        }
        let phase = if epoch < self.cfg.sl_epochs { Phase::Sl } else { Phase::Rl };
        self.opt.set_lr_scale(match phase {
            Phase::Sl => 1.0,
            Phase::Rl => self.cfg.rl_lr_scale,
        });
        let mut order = self.data.split.train.clone();
        shuffle(&mut order, rng::derive(self.seed, &[S_SHUFFLE, epoch as u64]));

        let mut stats = LossStats::default();
        let (mut norm_p, mut norm_v) = (0.0, 0.0);
        let (mut correct, mut turns, mut episodes) = (0usize, 0usize, 0usize);
        let n_batches = order.len().div_ceil(self.cfg.batch_applicants);
        for (b, chunk) in order.chunks(self.cfg.batch_applicants).enumerate() {
            let mut trajs = Vec::with_capacity(chunk.len());
            for (j, &pi) in chunk.iter().enumerate() {
                let ids = |s: u64| rng::derive(self.seed, &[s, epoch as u64, b as u64, j as u64]);
                let applicant = self.data.applicant(pi, &self.cfg.sim, ids(S_APPLICANT));
                let (driver, seed) = match phase {
                    Phase::Sl => (teacher_of(self.variant), ids(S_TEACHER)),
                    Phase::Rl => (Driver::Sample(&self.policy), ids(S_ROLLOUT)),
                };
                let t = run_episode(driver, self.data.graph(pi), &applicant, self.cfg.limits, &self.cfg.rewards, seed, pi)?;
                correct += usize::from(t.correct());
                turns += t.outcome.questions;
                episodes += 1;
                trajs.push(t);
            }
            let data = self.data;
            let batch: Vec<_> = trajs.iter().map(|t| (data.topology(t.profile), t)).collect();
            let objective = match phase {
                Phase::Sl => Objective::Imitation,
                Phase::Rl => Objective::Reinforce,
            };
            let (s, (np, nv)) = update(&mut self.policy, &mut self.opt, &batch, objective)?;
            stats.steps += s.steps;
            stats.policy_loss += s.policy_loss;
            stats.value_loss += s.value_loss;
            stats.agreements += s.agreements;
            norm_p += np / n_batches as f64;
            norm_v += nv / n_batches as f64;
        }

        let dev = eval::evaluate(System::Policy(&self.policy), self.data, &self.data.split.dev, &self.cfg.dev_eval(self.seed))?;
        let row = MetricsRow {
            epoch: epoch + 1,
            phase,
            dev_accuracy: dev.accuracy,
            dev_avg_turns: dev.avg_turns,
            train_accuracy: correct as f64 / episodes.max(1) as f64,
            train_avg_turns: turns as f64 / episodes.max(1) as f64,
            policy_loss: stats.mean_policy_loss(),
            value_loss: stats.mean_value_loss(),
            agreement: stats.agreement(),
            grad_norm_policy: norm_p,
            grad_norm_value: norm_v,
        };
        let better = dev.accuracy > self.best_dev.0 || (dev.accuracy == self.best_dev.0 && dev.avg_turns < self.best_dev.1);
        if better {
            self.best_dev = (dev.accuracy, dev.avg_turns);
            self.best_epoch = epoch + 1;
            self.best = self.policy.clone();
        }
        self.log.push(row);
        if let Some(dir) = self.out_dir.clone() {
            self.write_outputs(&dir)?;
        }
        Ok(self.log.last().expect("just pushed"))
    }

    /// Runs the remaining epochs.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&MetricsRow)) -> Result<()> {
        while !self.is_finished() {
            let row = self.run_epoch()?;
            on_epoch(row);
        }
        Ok(())
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.checkpoint()?.save(&dir.join("last.ckpt"))?;
        self.best_checkpoint().save(&dir.join("best.ckpt"))?;
        let path = dir.join("metrics.csv");
        std::fs::write(&path, metrics_csv(&self.log)?).map_err(|e| Error::io(&path, e))
    }
}

fn shuffle(v: &mut [usize], seed: u64) {
    use rand::seq::SliceRandom;
    v.shuffle(&mut rng::seeded(seed));
}
