//! Personal knowledge graph of one applicant and the multiple-choice
//! questions it yields.

use kgfraud::kg::{generate_world, personal_kg, render_question, sample_profiles, spread_degree, Label, WorldGenConfig};

fn main() -> anyhow::Result<()> {
    let world = generate_world(&WorldGenConfig::default(), 7)?;
    let profile = sample_profiles(&world, 1, 3)?.remove(0);
    let pkg = personal_kg(&world, &profile);
    println!("personal KG: {} triplets", pkg.len());

    for (k, t) in pkg.all().filter(|t| pkg.is_askable(t)).take(5).enumerate() {
        let q = render_question(&world, t, k as u64)?;
        println!("\n{} (spread {:.2})", q.text, spread_degree(&pkg, t.tail)?);
        for l in Label::ALL {
            let mark = if l == q.correct_label { "*" } else { " " };
            println!(" {mark} {l:?}. {}", q.option(l));
        }
    }
    Ok(())
}
