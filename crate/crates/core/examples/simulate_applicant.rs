//! Sample simulated applicants, look at their calibrated knowledge and let
//! them answer rendered questions.

use kgfraud::kg::{generate_world, personal_kg, render_question, sample_profiles, Item, WorldGenConfig};
use kgfraud::simulator::{answer, calibrate, sample_applicant, SimConfig};

fn main() -> anyhow::Result<()> {
    let world = generate_world(&WorldGenConfig::default(), 7)?;
    let profiles = sample_profiles(&world, 20, 7)?;
    let cfg = SimConfig::default();

    let mut fake_counts = [0usize; 4];
    let mut frauds = 0;
    for (s, p) in profiles.iter().enumerate() {
        let pkg = personal_kg(&world, p);
        for rep in 0..50u64 {
            let app = sample_applicant(&pkg, &cfg, (s as u64) << 8 | rep);
            frauds += app.identity.is_fraud() as usize;
            for item in &app.fake_items {
                fake_counts[item.index()] += 1;
            }
        }
    }
    println!("{frauds}/1000 fraudulent; fake items by weight 2:2:1:1 ->");
    for item in Item::ALL {
        println!("  {:<10} {}", item.name(), fake_counts[item.index()]);
    }

    let pkg = personal_kg(&world, &profiles[0]);
    let app = sample_applicant(&pkg, &cfg, 99);
    let edges: Vec<_> = app.knowledge.iter().map(|(t, _)| (t.head, t.tail)).collect();
    let known: Vec<bool> = app.knowledge.iter().map(|k| k.1).collect();
    assert_eq!(calibrate(&edges, &known), known, "knowledge is already closed");
    println!("\napplicant {:?}, fake {:?}, knows {}/{}", app.identity, app.fake_items, app.n_known(), app.knowledge.len());
    for (k, t) in pkg.all().filter(|t| pkg.is_askable(t)).take(4).enumerate() {
        let q = render_question(&world, t, k as u64)?;
        println!("  {} -> {:?}", q.text, answer(&app, &q)?);
    }
    Ok(())
}
