//! Flat Rule and Hierarchical Rule over the desk test split.

use kgfraud::config::ExperimentConfig;
use kgfraud::eval::{evaluate, EvalConfig, System};
use kgfraud::kg::{generate_world, sample_profiles, ProfilesFile, Split, PROFILES_FORMAT_VERSION};
use kgfraud::rules::{hierarchical_rule_episode, recount_hierarchical};
use kgfraud::simulator::SimConfig;
use kgfraud::training::Dataset;

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::default();
    let world = generate_world(&cfg.world, cfg.seed)?;
    let profiles = sample_profiles(&world, 300, cfg.seed)?;
    let split = Split::random(300, (200, 50, 50), cfg.seed)?;
    let data = Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed: cfg.seed, profiles, split })?;

    let eval = EvalConfig { seed: 11, ..EvalConfig::default() };
    for system in [System::FlatRule, System::HierarchicalRule] {
        let r = evaluate(system, &data, &data.split.test, &eval)?;
        println!("{:<18} accuracy {:.3} turns {:5.2} {:?}", r.system, r.accuracy, r.avg_turns, r.confusion);
        if let Some(rc) = r.rule_consistency {
            println!("{:<18} p(RS1|Cond1) {:?} p(RS2|Cond2) {:?}", "", rc.p_rs1_cond1, rc.p_rs2_cond2);
        }
    }

    // One transcript, recounted by hand.
    let p = data.split.test[0];
    let app = data.applicant(p, &SimConfig::default(), 5);
    let (ep, d) = hierarchical_rule_episode(data.graph(p), &app, 5)?;
    let n: [usize; 4] = std::array::from_fn(|i| ep.topology().worker_answers[i].len());
    let again = recount_hierarchical(&d.transcript, n, ep.limits().max_worker_turns)?;
    println!("\ntruth {:?}", app.identity);
    for (item, t, ok) in &d.transcript {
        println!("  {:<10} {:>6} -> {}", item.name(), t.tail, if *ok { "correct" } else { "wrong" });
    }
    println!("decision {:?} items {:?}; recount agrees: {}", d.decision, d.item_decisions, again == d);
    Ok(())
}
