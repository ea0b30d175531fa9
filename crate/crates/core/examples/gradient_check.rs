//! Finite-difference check of the per-step policy loss `-A log pi(a)` on a
//! real dialogue state.

use kgfraud::dialogue::build_graph;
use kgfraud::episode::Agent;
use kgfraud::kg::{generate_world, personal_kg, sample_profiles, WorldGenConfig};
use kgfraud::nn::{grad_check, ParamSet};
use kgfraud::policy::{Policy, PolicyConfig, Variant};

fn main() -> anyhow::Result<()> {
    let world = generate_world(&WorldGenConfig::default(), 7)?;
    let profile = sample_profiles(&world, 1, 3)?.remove(0);
    let g = build_graph(&personal_kg(&world, &profile))?;
    let feats = g.encode_all();
    let policy = Policy::new(Variant::FullS, PolicyConfig { hidden: 6, depth: None, scorer_hidden: 5, value_hidden: 4 }, 2);
    let mask = [true, true, true, true, false, false];
    let (chosen, adv) = (1, 0.8);

    let loss = |ps: &ParamSet| {
        let mut p = policy.clone();
        p.params = ps.clone();
        let mut f = p.forward(g.topology(), &feats);
        let lp = f.log_probs(Agent::Manager, &mask)?;
        let mut seed = vec![0.0; mask.len()];
        seed[chosen] = -adv;
        let value = -adv * f.tape.value(lp)[chosen];
        let mut grads = ps.gradients();
        f.tape.backward(&[(lp, seed)], &mut grads)?;
        Ok((value, grads))
    };
    let r = grad_check(&policy.params, 1e-5, None, loss)?;
    println!("{} coordinates, max relative error {:.2e}", r.checked, r.max_rel_error);
    if let Some((name, i, a, n)) = r.worst {
        println!("worst: {name}[{i}] analytic {a:.6e} numeric {n:.6e}");
    }
    Ok(())
}
