//! Command-line entry points.
//!
//! Every subcommand reads an optional `--config` experiment file (see
//! [`crate::config`]) and applies its flags on top.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::episode::{self, Episode};
use crate::eval::{self, System};
use crate::kg::{generate_world, render_question, sample_profiles, Label, ProfilesFile, Split, World, PROFILES_FORMAT_VERSION};
use crate::nn::Checkpoint;
use crate::policy::{Policy, Variant};
use crate::rules::{FlatRule, HierarchicalRule};
use crate::service::{self, AppState, ServiceConfig};
use crate::session::{Session, Status};
use crate::simulator::SimResponder;
use crate::training::{Dataset, Trainer};

#[derive(Debug, Parser)]
#[command(name = "kgfraud", version, about = "Knowledge-graph dialogue agents for identity-fraud detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// World file; overrides `world_path`.
    #[arg(long, global = true)]
    pub world: Option<PathBuf>,
    /// Profiles file; overrides `profiles_path`.
    #[arg(long, global = true)]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world.
    GenWorld {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample applicant profiles and a train/dev/test split from a world.
    GenProfiles {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// Train,dev,test sizes.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        split: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one applicant against a rule baseline and print the dialogue.
    Simulate {
        #[arg(long, default_value_t = 0)]
        profile: usize,
        /// `hierarchical-rule` or `flat-rule`.
        #[arg(long, default_value = "hierarchical-rule")]
        system: String,
        #[command(flatten)]
        common: Common,
    },
    /// Supervised pre-training only.
    Pretrain {
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Pre-train then fine-tune with policy gradient.
    Train {
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sl_epochs: Option<usize>,
        #[arg(long)]
        rl_epochs: Option<usize>,
        /// Continue from a `last.ckpt`.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint (or a rule baseline) on the test split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// `flat-rule` or `hierarchical-rule` instead of a checkpoint.
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Report file; defaults to `eval.json` next to the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Manager action curves, rule consistency and sample dialogues.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory for `manager_curves.csv` and `dialogues.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        dialogues: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Answer the policy's questions in the terminal.
    Play {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        profile: usize,
        #[arg(long)]
        inspect: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Serve the `/v1/` session API.
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        idle_timeout_secs: Option<u64>,
        #[arg(long)]
        max_sessions: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = &c.world {
        cfg.world_path = w.clone();
    }
    if let Some(p) = &c.profiles {
        cfg.profiles_path = p.clone();
    }
    Ok(cfg)
}

fn load_data(cfg: &ExperimentConfig) -> anyhow::Result<Dataset> {
    let world = World::load(&cfg.world_path)?;
    let profiles = ProfilesFile::load(&cfg.profiles_path)?;
    Ok(Dataset::new(world, profiles)?)
}

fn load_policy(path: &Path) -> anyhow::Result<Policy> {
    Ok(Policy::from_checkpoint(&Checkpoint::load(path)?)?)
}

fn rule_system(name: &str) -> anyhow::Result<System<'static>> {
    match name {
        "flat-rule" => Ok(System::FlatRule),
        "hierarchical-rule" => Ok(System::HierarchicalRule),
        other => bail!("unknown system `{other}` (expected flat-rule or hierarchical-rule)"),
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn train_loop(mut t: Trainer<'_>, out: &Path, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let (ta, tt) = t.teacher_dev();
    writeln!(stdout, "teacher dev accuracy {ta:.4} avg turns {tt:.2}")?;
    t = t.with_output(out);
    let mut err = None;
    t.run(|r| {
        if let Err(e) = writeln!(
            stdout,
            "epoch {:>3} {} dev_accuracy {:.4} dev_avg_turns {:.2} policy_loss {:.4} value_loss {:.4}",
            r.epoch,
            r.phase.name(),
            r.dev_accuracy,
            r.dev_avg_turns,
            r.policy_loss,
            r.value_loss
        ) {
            err.get_or_insert(e);
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    t.write_outputs(out)?;
    writeln!(stdout, "best epoch {} dev accuracy {:.4}; wrote {}", t.best_epoch(), t.best_dev().0, out.join("best.ckpt").display())?;
    Ok(())
}

/// Runs a parsed command against the given terminal streams.
pub fn run(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::GenWorld { out, common } => {
            let cfg = load_config(&common)?;
            let world = generate_world(&cfg.world, cfg.seed)?;
            write_file(&out, &world.to_json())?;
            writeln!(stdout, "wrote {} ({} entities, {} triplets)", out.display(), world.entities.len(), world.triplets.len())?;
        }
        Command::GenProfiles { out, count, split, common } => {
            let cfg = load_config(&common)?;
            let world = World::load(&cfg.world_path)?;
            let n = count.unwrap_or(cfg.profiles.count);
            let [a, b, c] = match split {
                Some(v) => [v[0], v[1], v[2]],
                None => cfg.profiles.split,
            };
            let profiles = sample_profiles(&world, n, cfg.seed)?;
            let split = Split::random(n, (a, b, c), cfg.seed)?;
            let file = ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed: cfg.seed, profiles, split };
            Dataset::new(world, file.clone())?;
            file.save(&out)?;
            writeln!(stdout, "wrote {} ({n} profiles, split {a}/{b}/{c})", out.display())?;
        }
        Command::Simulate { profile, system, common } => {
            let cfg = load_config(&common)?;
            let data = load_data(&cfg)?;
            if profile >= data.len() {
                bail!("profile {profile} out of range (0..{})", data.len());
            }
            let sys = rule_system(&system)?;
            let ev = cfg.eval_config();
            let applicant = data.applicant(profile, &ev.sim, ev.applicant_seed(0, profile));
            let fakes: Vec<String> = applicant.fake_items.iter().map(|i| i.to_string()).collect();
            writeln!(stdout, "applicant {} identity {} fake items [{}] knows {} of {} facts", data.profiles[profile].applicant_id, applicant.identity, fakes.join(", "), applicant.n_known(), applicant.knowledge.len())?;
            let mut ep = Episode::new(data.graph(profile), sys.mode(), ev.limits);
            let mut responder = SimResponder { applicant: &applicant };
            let out = match sys {
                System::FlatRule => episode::run(&mut ep, &mut FlatRule::new(ev.rule_seed(0, profile)), &mut responder)?,
                _ => episode::run(&mut ep, &mut HierarchicalRule::new(ev.rule_seed(0, profile)), &mut responder)?,
            };
            for (k, x) in ep.transcript().iter().enumerate() {
                let q = render_question(&data.world, &x.triplet, cfg.seed.wrapping_add(k as u64))?;
                writeln!(stdout, "Q{:<2} [{}] {}  -> {}", k + 1, x.item, q.text, if x.correct { "correct" } else { "wrong" })?;
            }
            writeln!(stdout, "decision {} after {} questions (truth {})", out.decision, out.questions, applicant.identity)?;
        }
        Command::Pretrain { variant, out, epochs, common } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = epochs {
                cfg.train.sl_epochs = e;
            }
            cfg.train.rl_epochs = 0;
            let data = load_data(&cfg)?;
            let t = Trainer::new(&data, cfg.train.clone(), variant.unwrap_or(cfg.variant), cfg.seed)?;
            train_loop(t, &out.unwrap_or(cfg.out_dir.clone()), stdout)?;
        }
        Command::Train { variant, out, sl_epochs, rl_epochs, resume, common } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = sl_epochs {
                cfg.train.sl_epochs = e;
            }
            if let Some(e) = rl_epochs {
                cfg.train.rl_epochs = e;
            }
            let data = load_data(&cfg)?;
            let out = out.unwrap_or(cfg.out_dir.clone());
            let t = match resume {
                Some(p) => {
                    let mut t = Trainer::resume(&data, &Checkpoint::load(&p)?)?;
                    if let Some(e) = rl_epochs {
                        t.set_rl_epochs(e)?;
                    }
                    t
                }
                None => Trainer::new(&data, cfg.train.clone(), variant.unwrap_or(cfg.variant), cfg.seed)?,
            };
            train_loop(t, &out, stdout)?;
        }
        Command::Eval { checkpoint, system, repeats, out, common } => {
            let cfg = load_config(&common)?;
            let data = load_data(&cfg)?;
            let mut ev = cfg.eval_config();
            if let Some(r) = repeats {
                ev.repeats = r;
            }
            let report = match (&checkpoint, &system) {
                (Some(p), None) => {
                    let policy = load_policy(p)?;
                    eval::evaluate(System::Policy(&policy), &data, &data.split.test, &ev)?
                }
                (None, Some(s)) => eval::evaluate(rule_system(s)?, &data, &data.split.test, &ev)?,
                _ => bail!("give exactly one of --checkpoint and --system"),
            };
            let out = out.unwrap_or_else(|| match &checkpoint {
                Some(p) => p.with_file_name("eval.json"),
                None => cfg.out_dir.join(format!("eval-{}.json", report.system)),
            });
            write_file(&out, &serde_json::to_string_pretty(&report)?)?;
            writeln!(stdout, "{} accuracy {:.4} avg turns {:.2} over {} episodes; wrote {}", report.system, report.accuracy, report.avg_turns, report.episodes, out.display())?;
        }
        Command::Analyze { checkpoint, out, dialogues, common } => {
            let cfg = load_config(&common)?;
            let data = load_data(&cfg)?;
            let policy = load_policy(&checkpoint)?;
            let ev = cfg.eval_config();
            let eps = eval::evaluate_episodes(System::Policy(&policy), &data, &data.split.test, &ev)?;
            let report = eval::summarize(policy.variant.name(), policy.variant.mode(), ev.repeats, &eps);
            let out = out.unwrap_or_else(|| checkpoint.with_file_name("analysis"));
            writeln!(stdout, "{} accuracy {:.4} avg turns {:.2}", report.system, report.accuracy, report.avg_turns)?;
            if let Some(rc) = &report.rule_consistency {
                let f = |p: Option<f64>| p.map_or("absent".to_string(), |x| format!("{x:.4}"));
                writeln!(stdout, "p(RS1|Cond1) {} over {}; p(RS2|Cond2) {} over {}", f(rc.p_rs1_cond1), rc.cond1, f(rc.p_rs2_cond2), rc.cond2)?;
            }
            if let Some(c) = &report.manager_curves {
                let mut csv = String::from("step,source,School,Company,Residence,BirthPlace,Decide,episodes\n");
                let rows = c.empirical.iter().map(|r| ("empirical", r)).chain(c.mass.iter().flatten().map(|r| ("mass", r)));
                for (i, (src, row)) in rows.enumerate() {
                    let step = if src == "empirical" { i } else { i - c.empirical.len() };
                    let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
                    csv.push_str(&format!("{},{src},{},{}\n", step + 1, cells.join(","), c.counts[step]));
                }
                write_file(&out.join("manager_curves.csv"), &csv)?;
                if let Some(first) = c.mass.as_ref().and_then(|m| m.first()) {
                    writeln!(stdout, "step-1 manager mass School {:.3} Company {:.3} Residence {:.3} BirthPlace {:.3}", first[0], first[1], first[2], first[3])?;
                }
            }
            let mut text = String::new();
            for &i in data.split.test.iter().take(dialogues) {
                let (ep, rec) = eval::play_one(System::Policy(&policy), &data, i, 0, &ev)?;
                text.push_str(&format!("profile {i} truth {} decision {}\n", rec.truth.identity, rec.outcome.decision));
                for (k, x) in ep.transcript().iter().enumerate() {
                    let q = render_question(&data.world, &x.triplet, k as u64)?;
                    text.push_str(&format!("  [{}] {} -> {}\n", x.item, q.text, if x.correct { "correct" } else { "wrong" }));
                }
                let verdicts: Vec<String> = rec.outcome.worker_decisions.iter().map(|d| d.map_or("-".into(), |d| d.to_string())).collect();
                text.push_str(&format!("  worker verdicts {}\n", verdicts.join(" ")));
            }
            write_file(&out.join("dialogues.txt"), &text)?;
            write_file(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
            writeln!(stdout, "wrote {}", out.display())?;
        }
        Command::Play { checkpoint, profile, inspect, common } => {
            let cfg = load_config(&common)?;
            let data = Arc::new(load_data(&cfg)?);
            let policy = Arc::new(load_policy(&checkpoint)?);
            let mut s = Session::start("terminal".into(), data.clone(), policy, profile, Vec::new(), cfg.seed)?;
            let labels = ["A", "B", "C", "D"];
            while s.status() == Status::AwaitingAnswer {
                let q = s.question().expect("awaiting an answer");
                writeln!(stdout, "\nQ{} [{}] {}", q.number, q.item, q.text)?;
                for (l, o) in labels.iter().zip(&q.options) {
                    writeln!(stdout, "  {l}. {o}")?;
                }
                let label = loop {
                    write!(stdout, "answer> ")?;
                    stdout.flush()?;
                    let mut line = String::new();
                    if stdin.read_line(&mut line)? == 0 {
                        bail!("input ended before the dialogue finished");
                    }
                    match line.parse::<Label>() {
                        Ok(l) => break l,
                        Err(_) => writeln!(stdout, "please answer A, B, C or D")?,
                    }
                };
                s.answer(label)?;
            }
            if inspect {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&s.view(true).probes)?)?;
            }
            let r = s.result().expect("finished");
            let items: Vec<String> = r.item_decisions.iter().map(|v| format!("{} {}", v.item, v.decision.map_or("-".into(), |d| d.to_string()))).collect();
            writeln!(stdout, "\ndecision: {} after {} questions ({})", r.decision, r.questions_asked, items.join(", "))?;
        }
        Command::Serve { checkpoint, bind, idle_timeout_secs, max_sessions, common } => {
            let cfg = load_config(&common)?;
            let data = Arc::new(load_data(&cfg)?);
            let policy = Arc::new(load_policy(&checkpoint)?);
            let scfg = ServiceConfig {
                idle_timeout: Duration::from_secs(idle_timeout_secs.unwrap_or(cfg.serve.idle_timeout_secs)),
                max_sessions: max_sessions.unwrap_or(cfg.serve.max_sessions),
                seed: cfg.seed,
            };
            let bind = bind.unwrap_or(cfg.serve.bind.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(AppState::new(data, policy, scfg), &bind))?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut out = std::io::stdout();
    match run(cli, &mut input, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
