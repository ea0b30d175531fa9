//! Max-aggregation message passing and the manager's action distribution
//! for an untrained hierarchical policy.

use kgfraud::dialogue::build_graph;
use kgfraud::episode::Agent;
use kgfraud::kg::{generate_world, personal_kg, sample_profiles, WorldGenConfig};
use kgfraud::policy::{distribution, manager_labels, message_passing, Policy, PolicyConfig, Variant};

fn main() -> anyhow::Result<()> {
    let world = generate_world(&WorldGenConfig::default(), 7)?;
    let profile = sample_profiles(&world, 1, 3)?.remove(0);
    let g = build_graph(&personal_kg(&world, &profile))?;

    for variant in Variant::ALL {
        let p = Policy::new(variant, PolicyConfig::default(), 1);
        let emb = message_passing(&g, &p)?;
        let norm = emb.user.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("{variant}: depth {}, {} nodes x {} dims, |user| = {norm:.3}", p.config.depth.unwrap_or(variant.default_depth()), emb.nodes.len(), emb.user.len());
    }

    let p = Policy::new(Variant::FullS, PolicyConfig::default(), 1);
    // At the start only the four workers are legal.
    let mask = [true, true, true, true, false, false];
    let probs = distribution(&p, g.topology(), &g.encode_all(), Agent::Manager, &mask)?;
    for (l, pr) in manager_labels().iter().zip(&probs) {
        println!("  {l:<12} {pr:.4}");
    }
    Ok(())
}
