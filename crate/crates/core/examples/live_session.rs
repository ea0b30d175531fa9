//! A live session through the same API the HTTP service uses, answered at
//! random, then replayed from its recorded answers.

use std::sync::Arc;

use rand::Rng as _;

use kgfraud::kg::{generate_world, sample_profiles, Item, Label, ProfilesFile, Split, WorldGenConfig, PROFILES_FORMAT_VERSION};
use kgfraud::policy::{Policy, PolicyConfig, Variant};
use kgfraud::session::{replay, Session, Status};
use kgfraud::training::Dataset;

fn main() -> anyhow::Result<()> {
    let wcfg = WorldGenConfig { entities_per_item: [12; 4], extent_m: 15_000.0, ..WorldGenConfig::default() };
    let world = generate_world(&wcfg, 2)?;
    let profiles = sample_profiles(&world, 8, 2)?;
    let split = Split::random(8, (4, 2, 2), 2)?;
    let data = Arc::new(Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed: 2, profiles, split })?);
    let policy = Arc::new(Policy::new(Variant::HpS, PolicyConfig::default(), 4));

    let mut s = Session::start("demo".into(), data.clone(), policy.clone(), 1, vec![Item::Company], 21)?;
    let mut r = kgfraud::rng::seeded(5);
    while s.status() == Status::AwaitingAnswer {
        let q = s.question().expect("awaiting");
        let label = Label::ALL[r.gen_range(0..4)];
        println!("Q{} [{}] {} -> {label:?}", q.number, q.item.name(), q.text);
        s.answer(label)?;
    }
    let result = s.result().expect("finished");
    for t in &result.transcript {
        println!("  Q{} answered {:?}: {}", t.number, t.answer, if t.correct { "correct" } else { "wrong" });
    }
    println!("decision {:?} after {} questions, per item {:?}", result.decision, result.questions_asked, result.item_decisions);
    let again = replay(&policy, &data, 1, &s.answers())?;
    println!("replayed decision {:?}", again.decision);
    Ok(())
}
