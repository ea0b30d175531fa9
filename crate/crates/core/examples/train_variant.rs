//! Generate a world, pre-train and fine-tune one variant, print its learning curve.
//!
//! `cargo run --release --example train_variant -- full-s 40`

use kgfraud::eval::{evaluate, EvalConfig, System};
use kgfraud::kg::{generate_world, sample_profiles, ProfilesFile, Split, WorldGenConfig, PROFILES_FORMAT_VERSION};
use kgfraud::policy::Variant;
use kgfraud::training::{Dataset, TrainConfig, Trainer};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let variant: Variant = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(Variant::FullS);
    let rl_epochs = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(40);
    let seed = 7;

    let world = generate_world(&WorldGenConfig::default(), seed)?;
    let profiles = sample_profiles(&world, 300, seed)?;
    let split = Split::random(profiles.len(), (200, 50, 50), seed)?;
    let data = Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed, profiles, split })?;

    let cfg = TrainConfig { rl_epochs, ..TrainConfig::default() };
    let mut trainer = Trainer::new(&data, cfg.clone(), variant, seed)?;
    let (ta, tt) = trainer.teacher_dev();
    println!("teacher dev accuracy {ta:.3} turns {tt:.2}");
    trainer.run(|r| {
        println!(
            "{:>3} {} dev {:.3} turns {:5.2} train {:.3} ploss {:.3} vloss {:.3} agree {:.3} |g| {:.2}/{:.2}",
            r.epoch, r.phase.name(), r.dev_accuracy, r.dev_avg_turns, r.train_accuracy, r.policy_loss, r.value_loss, r.agreement, r.grad_norm_policy, r.grad_norm_value
        )
    })?;
    let eval = EvalConfig { repeats: cfg.eval_repeats, seed: kgfraud::rng::derive(seed, &[3]), ..EvalConfig::default() };
    let report = evaluate(System::Policy(trainer.best_policy()), &data, &data.split.test, &eval)?;
    let hr = evaluate(System::HierarchicalRule, &data, &data.split.test, &eval)?;
    println!("best epoch {} test accuracy {:.3} turns {:.2} (hierarchical rule {:.3})", trainer.best_epoch(), report.accuracy, report.avg_turns, hr.accuracy);
    if let Some(rc) = report.rule_consistency {
        println!("p(RS1|Cond1) {:?} p(RS2|Cond2) {:?}", rc.p_rs1_cond1, rc.p_rs2_cond2);
    }
    if let Some(c) = &report.manager_curves {
        println!("step-1 empirical {:?} mass {:?}", c.empirical.first(), c.mass.as_ref().and_then(|m| m.first().cloned()));
    }
    Ok(())
}
