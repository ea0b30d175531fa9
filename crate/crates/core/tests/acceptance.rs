//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as part of `cargo test`; the desk experiment takes about half an
//! hour on one core. Set `KGF_ACCEPTANCE_STRICT=1` to exit nonzero when a
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use clap::Parser;
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde_json::{json, Value};
use tower::ServiceExt;

use kgfraud::cli::{run, Cli};
use kgfraud::config::ExperimentConfig;
use kgfraud::dialogue::Topology;
use kgfraud::episode::{self, Action, Agent, Decision, Episode, Limits, Mode, ScriptedResponder, StepRecord};
use kgfraud::eval::{evaluate, play_one, rule_consistency, EvalConfig, EvalReport, System};
use kgfraud::kg::{generate_world, sample_profiles, EntityId, Item, ProfilesFile, Split, Triplet, PROFILES_FORMAT_VERSION};
use kgfraud::nn::{rel_error, Gradients, ParamId, ParamSet, Tape};
use kgfraud::policy::{distribution, sample, Policy, PolicyConfig, PolicyController, Variant};
use kgfraud::rng;
use kgfraud::service::{router, AppState, ServiceConfig};
use kgfraud::simulator::{calibrate, SimConfig};
use kgfraud::training::{discounted_returns, metrics_csv, run_episode, Dataset, Driver, MetricsRow, Phase, RewardConfig, TrainConfig, Trainer, Trajectory};

type Outcome = anyhow::Result<(bool, String)>;

struct Report {
    failed: usize,
    /// Substring filters from the command line; empty runs everything.
    only: Vec<String>,
}

impl Report {
    fn wants(&self, name: &str) -> bool {
        self.only.is_empty() || self.only.iter().any(|f| name.contains(f.as_str()))
    }

    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        if !self.wants(name) {
            return;
        }
        let t = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
}

fn desk_data() -> anyhow::Result<Dataset> {
    let cfg = ExperimentConfig::default();
    let world = generate_world(&cfg.world, cfg.seed)?;
    let n = cfg.profiles.count;
    let [a, b, c] = cfg.profiles.split;
    let profiles = sample_profiles(&world, n, cfg.seed)?;
    let split = Split::random(n, (a, b, c), cfg.seed)?;
    Ok(Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed: cfg.seed, profiles, split })?)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

// ---------------------------------------------------------------- gradients

fn random_params(shapes: &[(&str, usize, usize)], seed: u64) -> ParamSet {
    let mut r = rng::seeded(seed);
    let mut ps = ParamSet::new();
    for &(name, rows, cols) in shapes {
        let id = ps.add(name, rows, cols);
        ps.get_mut(id).values.iter_mut().for_each(|v| *v = r.gen_range(-1.5..1.5));
    }
    ps
}

/// Below this `|analytic| + |numeric|`, central differences at h = 1e-5 in
/// f64 cannot resolve a 1e-4 relative error; such coordinates are held to an
/// absolute bound instead.
const RESOLVABLE: f64 = 1e-6;
const ABS_BOUND: f64 = 1e-9;

/// (analytic, numeric) per coordinate, central differences with step 1e-5.
fn finite_differences<F>(params: &ParamSet, coords: Option<&[(ParamId, usize)]>, mut f: F) -> kgfraud::Result<Vec<(String, f64, f64)>>
where
    F: FnMut(&ParamSet) -> kgfraud::Result<(f64, Gradients)>,
{
    let h = 1e-5;
    let (_, analytic) = f(params)?;
    let all: Vec<(ParamId, usize)> = (0..params.len()).flat_map(|p| (0..params.get(p).len()).map(move |i| (p, i))).collect();
    let mut work = params.clone();
    let mut out = Vec::new();
    for &(p, i) in coords.unwrap_or(&all) {
        let orig = work.get(p).values[i];
        work.get_mut(p).values[i] = orig + h;
        let (fp, _) = f(&work)?;
        work.get_mut(p).values[i] = orig - h;
        let (fm, _) = f(&work)?;
        work.get_mut(p).values[i] = orig;
        out.push((format!("{}[{i}]", params.get(p).name), analytic.get(p)[i], (fp - fm) / (2.0 * h)));
    }
    Ok(out)
}

fn primitive_check(prim: usize, seed: u64) -> kgfraud::Result<Vec<(String, f64, f64)>> {
    let mut r = rng::seeded(seed ^ 0x5eed);
    let (rows, cols) = (r.gen_range(1..7), r.gen_range(1..7));
    let ps = random_params(&[("w", rows, cols), ("x", cols, 1), ("y", cols, 1), ("b", rows, 1)], seed);
    let width = match prim {
        0 | 1 => rows,
        4 => 2 * cols,
        _ => cols,
    };
    let s: Vec<f64> = (0..width).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mask: Vec<bool> = (0..cols).map(|i| i == 0 || r.gen_bool(0.7)).collect();
    finite_differences(&ps, None, |p| {
        let mut t = Tape::new(p);
        let (x, y) = (t.param(1), t.param(2));
        let out = match prim {
            0 => t.affine(0, x, Some(3))?,
            1 => t.affine(0, x, None)?,
            2 => t.add(x, y)?,
            3 => t.tanh(x),
            4 => t.concat(&[x, y]),
            5 => t.max(&[x, y], cols)?,
            _ => t.masked_log_softmax(x, &mask)?,
        };
        let v = t.value(out).iter().zip(&s).filter(|(o, _)| o.is_finite()).map(|(a, b)| a * b).sum();
        let mut g = p.gradients();
        t.backward(&[(out, s.clone())], &mut g)?;
        Ok((v, g))
    })
}

/// `-A log pi(a)` if `ret` is `None`, else `(V - R)^2 / 2`.
fn step_loss(p: &Policy, ps: &ParamSet, topo: &Topology, s: &StepRecord, adv: f64, ret: Option<f64>) -> kgfraud::Result<(f64, kgfraud::nn::Gradients)> {
    let mut q = p.clone();
    q.params = ps.clone();
    let mut f = q.forward(topo, &s.features);
    let mut grads = ps.gradients();
    match ret {
        None => {
            let lp = f.log_probs(s.agent, &s.mask)?;
            let mut seed = vec![0.0; s.mask.len()];
            seed[s.chosen] = -adv;
            let l = -adv * f.tape.value(lp)[s.chosen];
            f.tape.backward(&[(lp, seed)], &mut grads)?;
            Ok((l, grads))
        }
        Some(r) => {
            let v = f.value(s.agent)?;
            let vv = f.tape.scalar(v);
            f.tape.backward(&[(v, vec![vv - r])], &mut grads)?;
            Ok((0.5 * (vv - r) * (vv - r), grads))
        }
    }
}

fn gradient_suite(data: &Dataset) -> Outcome {
    let t0 = Instant::now();
    let (mut worst, mut worst_abs) = (0.0f64, 0.0f64);
    let (mut checked, mut tiny, mut zero) = (0, 0, 0);
    let mut where_ = String::new();
    let mut note = |r: Vec<(String, f64, f64)>, label: String| {
        for (name, a, n) in r {
            checked += 1;
            if a.abs() + n.abs() < RESOLVABLE {
                tiny += 1;
                zero += (a == 0.0) as usize;
                worst_abs = worst_abs.max((a - n).abs());
            } else if rel_error(a, n) > worst {
                worst = rel_error(a, n);
                where_ = format!("{label} {name} analytic {a:.6e} numeric {n:.6e}");
            }
        }
    };
    let names = ["affine", "affine-nobias", "add", "tanh", "concat", "max", "masked-log-softmax"];
    for (prim, name) in names.iter().enumerate() {
        for seed in 0..40 {
            note(primitive_check(prim, seed)?, name.to_string());
        }
    }
    // Real desk states: every agent kind, small and default widths.
    let small = PolicyConfig { hidden: 6, depth: None, scorer_hidden: 5, value_hidden: 4 };
    let app = data.applicant(0, &SimConfig::default(), 11);
    let topo = data.topology(0);
    for variant in Variant::ALL {
        let driver = if variant == Variant::MpS { Driver::FlatRule } else { Driver::HierarchicalRule };
        let traj = run_episode(driver, data.graph(0), &app, Limits::default(), &RewardConfig::default(), 3, 0)?;
        let mut picked: Vec<&StepRecord> = Vec::new();
        let mut kinds = BTreeSet::new();
        for s in &traj.steps {
            let kind = match s.agent {
                Agent::Manager => 0,
                Agent::Worker(_) => 1,
                Agent::Flat => 2,
            };
            let decide = matches!(s.action, Action::Decide { .. });
            if kinds.insert((kind, decide)) {
                picked.push(s);
            }
        }
        for (cfg, stride) in [(small.clone(), 1), (PolicyConfig::default(), 97)] {
            let p = Policy::new(variant, cfg, 21);
            let mut policy_coords = Vec::new();
            let mut value_coords = Vec::new();
            for i in 0..p.params.len() {
                let t = p.params.get(i);
                let dst = if t.name.starts_with("value_") { &mut value_coords } else { &mut policy_coords };
                dst.extend((0..t.len()).step_by(stride).map(|j| (i, j)));
            }
            for s in &picked {
                let label = format!("{variant} d={} {:?} {:?}", p.config.hidden, s.agent, s.action);
                note(finite_differences(&p.params, Some(&policy_coords), |ps| step_loss(&p, ps, topo, s, 0.7, None))?, label.clone());
                note(finite_differences(&p.params, Some(&value_coords), |ps| step_loss(&p, ps, topo, s, 0.0, Some(1.3)))?, label + " value");
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst <= 1e-4 && worst_abs <= ABS_BOUND && secs < 60.0;
    Ok((
        ok,
        format!(
            "{checked} coordinates, max relative error {worst:.2e} (limit 1e-4) at {where_}; {tiny} coordinates ({zero} exactly zero) with |g| < {RESOLVABLE:e} within {worst_abs:.1e} absolute (limit {ABS_BOUND:e}); {secs:.1}s (limit 60s)"
        ),
    ))
}

// ---------------------------------------------------------------- masks

/// Structural checks that do not trust the crate's own audit.
fn independent_audit(ep: &Episode) -> Option<String> {
    let limits = ep.limits();
    let mut asked = [0usize; 4];
    let mut decided: [Option<Decision>; 4] = [None; 4];
    let mut questions = 0;
    for (k, s) in ep.steps().iter().enumerate() {
        if !s.mask[s.chosen] {
            return Some(format!("step {k} took a masked action"));
        }
        match (s.agent, s.action) {
            (Agent::Worker(i), Action::Decide { decision }) => {
                let all = ep.topology().worker_answers[i.index()].len();
                let capped = asked[i.index()] >= limits.max_worker_turns || questions >= limits.max_system_turns;
                if asked[i.index()] < 3.min(all) && !capped {
                    return Some(format!("step {k}: {i:?} decided after {} of {all}", asked[i.index()]));
                }
                decided[i.index()] = Some(decision);
            }
            (Agent::Manager, Action::Decide { .. }) => {
                let all = decided.iter().all(Option::is_some);
                let fraud = decided.contains(&Some(Decision::Fraud));
                if !all && !fraud && questions < limits.max_system_turns {
                    return Some(format!("step {k}: manager decided with {decided:?}"));
                }
            }
            (_, Action::Ask { item, .. }) => {
                asked[item.index()] += 1;
                questions += 1;
            }
            _ => {}
        }
    }
    if questions > limits.max_system_turns {
        return Some(format!("{questions} questions"));
    }
    None
}

fn mask_soundness(data: &Dataset) -> Outcome {
    let sim = SimConfig::default();
    let cfg = PolicyConfig { hidden: 16, depth: None, scorer_hidden: 16, value_hidden: 8 };
    let mut details = Vec::new();
    let mut ok = true;
    for variant in Variant::ALL {
        let (mut illegal, mut violations, mut rejected) = (0usize, 0usize, 0usize);
        let mut first = None;
        for e in 0..1000u64 {
            // A fresh random policy every 50 episodes, sampled with temperature 1.
            let policy = Policy::new(variant, cfg.clone(), rng::derive(17, &[variant as u64, e / 50]));
            let mut r = rng::stream(19, &[variant as u64, e]);
            let profile = r.gen_range(0..data.len());
            let app = data.applicant(profile, &sim, r.gen());
            let mut ep = Episode::new(data.graph(profile), variant.mode(), Limits::default());
            while !ep.is_done() {
                if let Some((_, _, triplet)) = ep.pending() {
                    ep.answer(app.knows(&triplet)?)?;
                    continue;
                }
                let dp = ep.decision_point().ok_or_else(|| anyhow!("stuck episode"))?;
                // Every masked candidate must be refused.
                for i in (0..dp.candidates.len()).filter(|&i| !dp.mask[i]) {
                    if ep.clone().apply(i).is_ok() {
                        illegal += 1;
                    } else {
                        rejected += 1;
                    }
                }
                let probs = distribution(&policy, ep.topology(), &ep.graph().encode_all(), dp.agent, &dp.mask)?;
                let i = sample(&probs, &dp.mask, &mut r)?;
                ep.apply(i)?;
            }
            for v in [episode::audit(&ep), independent_audit(&ep)].into_iter().flatten() {
                violations += 1;
                first.get_or_insert(v);
            }
        }
        ok &= illegal == 0 && violations == 0;
        details.push(format!("{variant}: {illegal} illegal, {violations} violations, {rejected} masked probes refused{}", first.map(|f| format!(" ({f})")).unwrap_or_default()));
    }
    Ok((ok, details.join("; ")))
}

// ---------------------------------------------------------------- simulator

fn pair(a: EntityId, b: EntityId) -> (EntityId, EntityId) {
    (a.min(b), a.max(b))
}

fn pair_knowledge(edges: &[(EntityId, EntityId)], known: &[bool]) -> BTreeMap<(EntityId, EntityId), bool> {
    let mut m = BTreeMap::new();
    for (&(a, b), &k) in edges.iter().zip(known) {
        if a != b {
            *m.entry(pair(a, b)).or_insert(false) |= k;
        }
    }
    m
}

fn two_known_triangles(edges: &[(EntityId, EntityId)], known: &[bool]) -> usize {
    let pairs = pair_knowledge(edges, known);
    let mut adj: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
    for &(a, b) in pairs.keys() {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut bad = 0;
    for &(a, b) in pairs.keys() {
        for &c in adj[&a].intersection(&adj[&b]) {
            if c > b {
                let n = [pair(a, b), pair(a, c), pair(b, c)].iter().filter(|p| pairs[p]).count();
                bad += (n == 2) as usize;
            }
        }
    }
    bad
}

/// Fixpoint by rescanning every entity triple until nothing changes.
fn brute_closure(edges: &[(EntityId, EntityId)], known: &[bool]) -> Vec<bool> {
    let mut pairs = pair_knowledge(edges, known);
    let nodes: Vec<EntityId> = pairs.keys().flat_map(|&(a, b)| [a, b]).collect::<BTreeSet<_>>().into_iter().collect();
    loop {
        let mut changed = false;
        for &a in &nodes {
            for &b in &nodes {
                for &c in &nodes {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let (ab, bc, ac) = (pair(a, b), pair(b, c), pair(a, c));
                    if let (Some(&true), Some(&true), Some(&false)) = (pairs.get(&ab), pairs.get(&bc), pairs.get(&ac)) {
                        pairs.insert(ac, true);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    edges.iter().zip(known).map(|(&(a, b), &k)| k || (a != b && pairs[&pair(a, b)])).collect()
}

fn simulator_calibration(data: &Dataset) -> Outcome {
    let sim = SimConfig::default();
    let (mut triangles, mut not_idempotent, mut order_dependent) = (0usize, 0usize, 0usize);
    let mut r = rng::seeded(23);
    for k in 0..10_000u64 {
        let profile = (k as usize) % data.len();
        let app = data.applicant(profile, &sim, rng::derive(29, &[k]));
        let edges: Vec<(EntityId, EntityId)> = app.knowledge.iter().map(|(t, _)| (t.head, t.tail)).collect();
        let known: Vec<bool> = app.knowledge.iter().map(|&(_, b)| b).collect();
        triangles += two_known_triangles(&edges, &known);
        not_idempotent += (calibrate(&edges, &known) != known) as usize;
        // Fresh raw draws, closed in two different edge orders.
        let raw: Vec<bool> = edges.iter().map(|_| r.gen_bool(0.3)).collect();
        let once = calibrate(&edges, &raw);
        not_idempotent += (calibrate(&edges, &once) != once) as usize;
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.shuffle(&mut r);
        let e2: Vec<_> = order.iter().map(|&i| edges[i]).collect();
        let k2: Vec<_> = order.iter().map(|&i| raw[i]).collect();
        let back = calibrate(&e2, &k2);
        order_dependent += order.iter().enumerate().any(|(j, &i)| back[j] != once[i]) as usize;
    }
    let mut mismatches = 0;
    for case in 0..1000u64 {
        let mut r = rng::stream(31, &[case]);
        let nodes = r.gen_range(2..7u32);
        let m = r.gen_range(1..=8);
        let edges: Vec<(EntityId, EntityId)> = (0..m).map(|_| (r.gen_range(0..nodes) as EntityId, r.gen_range(0..nodes) as EntityId)).collect();
        let known: Vec<bool> = (0..m).map(|_| r.gen_bool(0.4)).collect();
        mismatches += (calibrate(&edges, &known) != brute_closure(&edges, &known)) as usize;
    }
    let ok = triangles == 0 && not_idempotent == 0 && order_dependent == 0 && mismatches == 0;
    Ok((
        ok,
        format!("10000 applicants: {triangles} two-known triangles, {not_idempotent} non-idempotent, {order_dependent} order-dependent; 1000 small graphs: {mismatches} brute-force mismatches"),
    ))
}

// ---------------------------------------------------------------- rules

fn recount(ep: &Episode, mode: Mode) -> (Decision, [Option<Decision>; 4]) {
    let t = ep.transcript();
    match mode {
        Mode::Flat => {
            let crt = t.iter().filter(|x| x.correct).count();
            (Decision::from_fraud(crt < t.len() - crt), [None; 4])
        }
        Mode::Hierarchical => {
            let mut items = [None; 4];
            let mut i = 0;
            while i < t.len() {
                let mut j = i;
                let (mut crt, mut wrg) = (0, 0);
                while j < t.len() && t[j].item == t[i].item {
                    if t[j].correct {
                        crt += 1;
                    } else {
                        wrg += 1;
                    }
                    j += 1;
                }
                items[t[i].item.index()] = Some(Decision::from_fraud(crt < wrg));
                i = j;
            }
            let fraud = items.contains(&Some(Decision::Fraud));
            (Decision::from_fraud(fraud), items)
        }
    }
}

fn rule_oracles(data: &Dataset) -> Outcome {
    let all: Vec<usize> = (0..data.len()).collect();
    let repeats = 10_000usize.div_ceil(data.len());
    let cfg = EvalConfig { repeats, seed: 37, ..EvalConfig::default() };
    let mut details = Vec::new();
    let mut ok = true;
    for system in [System::FlatRule, System::HierarchicalRule] {
        let mut mismatches = 0;
        let mut records = Vec::new();
        for rep in 0..repeats {
            for &p in &all {
                let (ep, rec) = play_one(system, data, p, rep, &cfg)?;
                let (d, items) = recount(&ep, system.mode());
                let item_ok = system.mode() == Mode::Flat || items == rec.outcome.worker_decisions;
                mismatches += (d != rec.outcome.decision || !item_ok) as usize;
                records.push(rec);
            }
        }
        ok &= mismatches == 0;
        let mut line = format!("{}: {mismatches}/{} recount mismatches", system.name(), records.len());
        if system.mode() == Mode::Hierarchical {
            let rc = rule_consistency(&records);
            ok &= rc.p_rs1_cond1 == Some(1.0) && rc.p_rs2_cond2 == Some(1.0);
            line += &format!(", p(RS1|Cond1) = {}/{}, p(RS2|Cond2) = {}/{}", rc.rs1, rc.cond1, rc.rs2, rc.cond2);
        }
        details.push(line);
    }
    Ok((ok, details.join("; ")))
}

// ---------------------------------------------------------------- rewards

fn returns_exact(t: &Trajectory) -> bool {
    t.sequences.iter().all(|seq| {
        seq.steps.iter().enumerate().all(|(k, &i)| {
            let next = seq.steps.get(k + 1).map_or(0.0, |&j| t.returns[j]);
            t.returns[i] == t.rewards[i] + seq.gamma * next
        })
    })
}

fn reward_accounting(data: &Dataset) -> Outcome {
    let sim = SimConfig::default();
    let rewards = RewardConfig::default();
    let policies: Vec<Policy> = Variant::ALL.iter().map(|&v| Policy::new(v, PolicyConfig { hidden: 8, depth: None, scorer_hidden: 8, value_hidden: 8 }, 41)).collect();
    let (mut n, mut bad) = (0, 0);
    for k in 0..600u64 {
        let p = (k as usize) % data.len();
        let app = data.applicant(p, &sim, rng::derive(43, &[k]));
        let driver = match k % 5 {
            0 => Driver::FlatRule,
            1 => Driver::HierarchicalRule,
            j => Driver::Sample(&policies[(j - 2) as usize]),
        };
        let t = run_episode(driver, data.graph(p), &app, Limits::default(), &rewards, k, p)?;
        n += 1;
        bad += (!returns_exact(&t)) as usize;
    }
    let r0 = discounted_returns(&[-0.1, -0.1, -0.1, 1.0], 0.99)[0];
    let exact = -0.1 - 0.1 * 0.99 - 0.1 * 0.99 * 0.99 + 0.99f64.powi(3);
    let ok = bad == 0 && (r0 - 0.673289).abs() <= 1e-6 && (r0 - exact).abs() < 1e-15;
    Ok((
        ok,
        format!(
            "{bad}/{n} trajectories break R_t = r_t + gamma R_t+1; worker example R0 = {r0:.6} (expected 0.673289 +/- 1e-6; the rounded literal 0.6734 differs by {:.1e})",
            (r0 - 0.6734).abs()
        ),
    ))
}

// ---------------------------------------------------------------- desk experiment

struct SeedRun {
    seed: u64,
    flat_rule: f64,
    hier_rule: f64,
    full: EvalReport,
    mps: f64,
    full_log: Vec<MetricsRow>,
    teacher_dev: f64,
    post_sl_dev: f64,
    best_full: Policy,
}

fn desk_seed(data: &Dataset, seed: u64) -> anyhow::Result<SeedRun> {
    let eval = ExperimentConfig { seed, ..ExperimentConfig::default() }.eval_config();
    let test = &data.split.test;
    let train = TrainConfig { rl_epochs: 100, ..TrainConfig::default() };
    let fr = evaluate(System::FlatRule, data, test, &eval)?;
    let hr = evaluate(System::HierarchicalRule, data, test, &eval)?;
    let mut results = BTreeMap::new();
    let mut full_log = Vec::new();
    let (mut teacher_dev, mut post_sl_dev) = (0.0, 0.0);
    let mut best_full = None;
    for variant in [Variant::FullS, Variant::MpS] {
        let t = Instant::now();
        let mut trainer = Trainer::new(data, train.clone(), variant, seed)?;
        trainer.run(|_| {})?;
        let report = evaluate(System::Policy(trainer.best_policy()), data, test, &eval)?;
        eprintln!(
            "  seed {seed} {variant}: best epoch {} dev {:.3}, test {:.3} in {:.2} turns ({:.0}s)",
            trainer.best_epoch(),
            trainer.best_dev().0,
            report.accuracy,
            report.avg_turns,
            t.elapsed().as_secs_f64()
        );
        if variant == Variant::FullS {
            full_log = trainer.log().to_vec();
            teacher_dev = trainer.teacher_dev().0;
            post_sl_dev = full_log[train.sl_epochs - 1].dev_accuracy;
            best_full = Some(trainer.best_policy().clone());
        }
        results.insert(variant, report);
    }
    eprintln!("  seed {seed}: flat rule {:.3}, hierarchical rule {:.3}", fr.accuracy, hr.accuracy);
    Ok(SeedRun {
        seed,
        flat_rule: fr.accuracy,
        hier_rule: hr.accuracy,
        mps: results[&Variant::MpS].accuracy,
        full: results.remove(&Variant::FullS).expect("trained"),
        full_log,
        teacher_dev,
        post_sl_dev,
        best_full: best_full.expect("trained"),
    })
}

fn directional(runs: &[SeedRun]) -> Outcome {
    let col = |f: &dyn Fn(&SeedRun) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
    let full = col(&|r| r.full.accuracy);
    let hr = col(&|r| r.hier_rule);
    let fr = col(&|r| r.flat_rule);
    let mps = col(&|r| r.mps);
    let c1 = full - hr >= 0.03;
    let c2 = hr >= fr;
    let c3 = mps <= full - 0.10;
    let c4 = (mps - 0.5).abs() <= 0.10;
    let per_seed: Vec<String> = runs.iter().map(|r| format!("seed {}: full {:.3} hr {:.3} fr {:.3} mp {:.3}", r.seed, r.full.accuracy, r.hier_rule, r.flat_rule, r.mps)).collect();
    let mark = |b: bool| if b { "ok" } else { "NO" };
    Ok((
        c1 && c2 && c3 && c4,
        format!(
            "medians full-s {full:.3}, hierarchical-rule {hr:.3}, flat-rule {fr:.3}, mp-s {mps:.3}; full-s >= hr + 0.03 {}; hr >= fr {}; mp-s <= full-s - 0.10 {}; |mp-s - 0.5| <= 0.10 {} ({})",
            mark(c1),
            mark(c2),
            mark(c3),
            mark(c4),
            per_seed.join(", ")
        ),
    ))
}

fn policy_analysis(runs: &[SeedRun]) -> Outcome {
    let mut rs1 = Vec::new();
    let mut rs2 = Vec::new();
    let mut margin = Vec::new();
    for r in runs {
        let rc = r.full.rule_consistency.ok_or_else(|| anyhow!("no rule consistency in report"))?;
        rs1.push(rc.p_rs1_cond1.unwrap_or(0.0));
        rs2.push(rc.p_rs2_cond2.unwrap_or(0.0));
        let m = r.full.manager_curves.as_ref().and_then(|c| c.mass.as_ref()).and_then(|m| m.first().copied()).ok_or_else(|| anyhow!("no manager mass"))?;
        margin.push(m[Item::School.index()] + m[Item::Company.index()] - m[Item::Residence.index()] - m[Item::BirthPlace.index()]);
    }
    let (a, b, m) = (median(&rs1), median(&rs2), median(&margin));
    Ok((
        a >= 0.9 && b >= 0.9 && m > 0.0,
        format!("median p(RS1|Cond1) {a:.3}, p(RS2|Cond2) {b:.3} (limit 0.9); step-1 mass (School+Company) - (Residence+BirthPlace) = {m:.2e} (per seed {margin:?})"),
    ))
}

fn pretraining(runs: &[SeedRun], sl_epochs: usize) -> Outcome {
    let gaps: Vec<f64> = runs.iter().map(|r| r.post_sl_dev - r.teacher_dev).collect();
    let gap = median(&gaps);
    let mut shape_ok = true;
    for r in runs {
        let phases: Vec<Phase> = r.full_log.iter().map(|m| m.phase).collect();
        shape_ok &= phases.len() > sl_epochs && phases[..sl_epochs].iter().all(|&p| p == Phase::Sl) && phases[sl_epochs..].iter().all(|&p| p == Phase::Rl);
        shape_ok &= r.full_log.iter().enumerate().all(|(i, m)| m.epoch == i + 1);
    }
    let csv = metrics_csv(&runs[0].full_log)?;
    let rows = csv.lines().count() - 1;
    Ok((
        gap.abs() <= 0.05 && shape_ok,
        format!(
            "median post-SL dev minus hierarchical rule {gap:+.3} (limit +/-0.05; per seed {:?}); log has {sl_epochs} sl + {} rl rows, {rows} csv rows, shape {}",
            gaps.iter().map(|g| format!("{g:+.3}")).collect::<Vec<_>>(),
            runs[0].full_log.len() - sl_epochs,
            if shape_ok { "ok" } else { "wrong" }
        ),
    ))
}

// ---------------------------------------------------------------- determinism

const PIPELINE: &str = r#"
seed = 13
world_path = "world.json"
profiles_path = "profiles.json"
out_dir = "run"

[world]
entities_per_item = [12, 12, 12, 12]
extent_m = 15000.0

[profiles]
count = 24
split = [12, 6, 6]

[train]
sl_epochs = 3
rl_epochs = 3
dev_repeats = 1
eval_repeats = 2
batch_applicants = 6

[train.policy]
hidden = 12
scorer_hidden = 12
value_hidden = 12
"#;

fn cli(args: &[&str]) -> anyhow::Result<()> {
    let mut argv = vec!["kgfraud"];
    argv.extend_from_slice(args);
    run(Cli::try_parse_from(argv)?, &mut Cursor::new(Vec::new()), &mut Vec::new())
}

fn pipeline(dir: &Path) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    let cfg = dir.join("exp.toml");
    std::fs::write(&cfg, PIPELINE)?;
    let cfg = cfg.to_str().context("path")?;
    cli(&["gen-world", "--config", cfg, "--out", dir.join("world.json").to_str().context("path")?])?;
    cli(&["gen-profiles", "--config", cfg, "--out", dir.join("profiles.json").to_str().context("path")?])?;
    cli(&["train", "--config", cfg, "--variant", "full-s"])?;
    cli(&["eval", "--config", cfg, "--checkpoint", dir.join("run/best.ckpt").to_str().context("path")?])?;
    ["world.json", "profiles.json", "run/metrics.csv", "run/eval.json"]
        .iter()
        .map(|f| Ok((f.to_string(), std::fs::read(dir.join(f)).with_context(|| f.to_string())?)))
        .collect()
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    let x = pipeline(a.path())?;
    let y = pipeline(b.path())?;
    let differ: Vec<&str> = x.iter().zip(&y).filter(|(p, q)| p.1 != q.1).map(|(p, _)| p.0.as_str()).collect();
    let rows = String::from_utf8_lossy(&x[2].1).lines().count() - 1;
    Ok((differ.is_empty(), format!("gen-world, gen-profiles, train ({rows} epochs), eval run twice; differing outputs: {differ:?}")))
}

// ---------------------------------------------------------------- service

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> anyhow::Result<(StatusCode, Value)> {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes)? }))
}

async fn replay_sessions(data: Arc<Dataset>, policies: Vec<Arc<Policy>>) -> Outcome {
    let (mut sessions, mut mismatches) = (0, 0);
    for policy in policies {
        let app = router(AppState::new(data.clone(), policy.clone(), ServiceConfig::default()));
        for k in 0..20u64 {
            let mut r = rng::stream(47, &[k, policy.variant as u64]);
            let profile = r.gen_range(0..data.len());
            let (st, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "profile": profile, "seed": k }))).await?;
            if st != StatusCode::CREATED {
                return Ok((false, format!("create returned {st}")));
            }
            let id = v["session_id"].as_str().context("session id")?.to_string();
            loop {
                let (_, v) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await?;
                if v["status"] == "finished" {
                    break;
                }
                let label = ["A", "B", "C", "D"][r.gen_range(0..4)];
                call(&app, "POST", &format!("/v1/sessions/{id}/answer"), Some(json!({ "label": label }))).await?;
            }
            let (_, res) = call(&app, "GET", &format!("/v1/sessions/{id}/result"), None).await?;
            let turns = res["transcript"].as_array().context("transcript")?;
            let answers: Vec<bool> = turns.iter().map(|t| t["correct"].as_bool().unwrap_or(false)).collect();
            let asked: Vec<Triplet> = turns.iter().map(|t| serde_json::from_value(t["triplet"].clone())).collect::<Result<_, _>>()?;
            let mut ep = Episode::new(data.graph(profile), policy.variant.mode(), Limits::default());
            let out = episode::run(&mut ep, &mut PolicyController::greedy(&policy), &mut ScriptedResponder::new(answers))?;
            let same_questions = ep.transcript().iter().map(|x| x.triplet).eq(asked.into_iter());
            let same = serde_json::to_value(out.decision)? == res["decision"] && same_questions;
            sessions += 1;
            mismatches += (!same) as usize;
        }
    }
    Ok((mismatches == 0, format!("{mismatches}/{sessions} recorded HTTP sessions replay differently")))
}

fn service_replay(data: Dataset, trained: Option<Policy>) -> Outcome {
    let mut policies: Vec<Arc<Policy>> = Variant::ALL.iter().map(|&v| Arc::new(Policy::new(v, PolicyConfig::default(), 53))).collect();
    policies.extend(trained.map(Arc::new));
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    rt.block_on(replay_sessions(Arc::new(data), policies))
}

fn main() {
    let t0 = Instant::now();
    let only = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut report = Report { failed: 0, only };
    let data = match desk_data() {
        Ok(d) => d,
        Err(e) => {
            println!("FAIL desk data: {e:#}");
            std::process::exit(1);
        }
    };
    report.check("gradient suite", || gradient_suite(&data));
    report.check("mask soundness", || mask_soundness(&data));
    report.check("simulator calibration", || simulator_calibration(&data));
    report.check("rule-baseline oracles", || rule_oracles(&data));
    report.check("reward/return accounting", || reward_accounting(&data));

    let desk = ["directional reproduction", "policy analysis", "pre-training"];
    let runs: anyhow::Result<Vec<SeedRun>> = if desk.iter().any(|n| report.wants(n)) {
        eprintln!("desk experiment: 3 seeds x (full-s, mp-s), 20 sl + 100 rl epochs each");
        [7, 8, 9].iter().map(|&s| desk_seed(&data, s)).collect()
    } else {
        Ok(Vec::new())
    };
    let sl = TrainConfig::default().sl_epochs;
    let trained = match &runs {
        Ok(runs) if runs.is_empty() => None,
        Ok(runs) => {
            report.check("directional reproduction", || directional(runs));
            report.check("policy analysis", || policy_analysis(runs));
            report.check("pre-training", || pretraining(runs, sl));
            let mut by_acc: Vec<&SeedRun> = runs.iter().collect();
            by_acc.sort_by(|a, b| a.full.accuracy.partial_cmp(&b.full.accuracy).unwrap());
            Some(by_acc[by_acc.len() / 2].best_full.clone())
        }
        Err(e) => {
            for name in desk {
                report.check(name, || Err(anyhow!("desk experiment failed: {e:#}")));
            }
            None
        }
    };
    report.check("determinism", determinism);
    report.check("service replay", || service_replay(data, trained));

    println!("{} criteria failed, {:.0}s total", report.failed, t0.elapsed().as_secs_f64());
    if report.failed > 0 && std::env::var("KGF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
