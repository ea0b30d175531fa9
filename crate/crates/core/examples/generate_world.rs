//! Build a synthetic world, sample applicant profiles and split them.
//!
//! `cargo run --release --example generate_world -- /tmp/world.json`

use kgfraud::kg::{generate_world, sample_profiles, Category, Split, WorldGenConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1);
    let world = generate_world(&WorldGenConfig::default(), 7)?;
    world.validate()?;

    let pois = world.entities_of(Category::Poi).count();
    println!("{} entities ({pois} POIs), {} relations, {} triplets", world.entities.len(), world.relations.len(), world.triplets.len());
    let heads = world.head_counts();
    let personal: Vec<usize> = heads.iter().copied().filter(|&n| n > 0).collect();
    println!("triplets per personal entity: min {} max {}", personal.iter().min().unwrap_or(&0), personal.iter().max().unwrap_or(&0));

    let profiles = sample_profiles(&world, 300, 7)?;
    let split = Split::random(profiles.len(), (200, 50, 50), 7)?;
    println!("{} profiles, split {}/{}/{}", profiles.len(), split.train.len(), split.dev.len(), split.test.len());
    let p = &profiles[0];
    for (item, e) in kgfraud::kg::Item::ALL.iter().zip(p.entities()) {
        println!("  applicant {} {:<10} {}", p.applicant_id, item.name(), world.entity(e).name);
    }

    if let Some(path) = out {
        world.save(&path)?;
        println!("saved {path}");
    }
    Ok(())
}
