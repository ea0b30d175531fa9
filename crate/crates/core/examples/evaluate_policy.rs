//! Train a small Full-S policy, save it, reload it and analyse its manager:
//! action curves by step and the two rule-consistency probabilities.

use kgfraud::eval::{evaluate, EvalConfig, System};
use kgfraud::kg::{generate_world, sample_profiles, ProfilesFile, Split, WorldGenConfig, PROFILES_FORMAT_VERSION};
use kgfraud::nn::Checkpoint;
use kgfraud::policy::{Policy, PolicyConfig, Variant};
use kgfraud::training::{Dataset, TrainConfig, Trainer};

fn main() -> anyhow::Result<()> {
    let wcfg = WorldGenConfig { entities_per_item: [20; 4], extent_m: 20_000.0, ..WorldGenConfig::default() };
    let world = generate_world(&wcfg, 3)?;
    let profiles = sample_profiles(&world, 60, 3)?;
    let split = Split::random(60, (40, 10, 10), 3)?;
    let data = Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed: 3, profiles, split })?;

    let cfg = TrainConfig {
        sl_epochs: 10,
        rl_epochs: 10,
        batch_applicants: 8,
        policy: PolicyConfig { hidden: 16, depth: None, scorer_hidden: 16, value_hidden: 16 },
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&data, cfg, Variant::FullS, 3)?;
    trainer.run(|r| println!("epoch {:>2} {} dev {:.3}", r.epoch, r.phase.name(), r.dev_accuracy))?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("best.ckpt");
    trainer.best_checkpoint().save(&path)?;
    let policy = Policy::from_checkpoint(&Checkpoint::load(&path)?)?;

    let eval = EvalConfig { repeats: 5, seed: 9, ..EvalConfig::default() };
    let r = evaluate(System::Policy(&policy), &data, &data.split.test, &eval)?;
    println!("\ntest accuracy {:.3}, {:.2} turns, worker accuracy {:?}", r.accuracy, r.avg_turns, r.worker_accuracy);
    if let Some(c) = &r.manager_curves {
        println!("step  {}", c.labels.join(" "));
        for (s, row) in c.mass.as_ref().unwrap_or(&c.empirical).iter().enumerate().take(5) {
            println!("{:>4}  {}", s + 1, row.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "));
        }
    }
    if let Some(rc) = r.rule_consistency {
        println!("p(RS1|Cond1) {:?} over {}, p(RS2|Cond2) {:?} over {}", rc.p_rs1_cond1, rc.cond1, rc.p_rs2_cond2, rc.cond2);
    }
    Ok(())
}
