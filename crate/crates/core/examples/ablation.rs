//! The five-system comparison at toy scale: two rules and three trained
//! variants on the same test applicants.

use kgfraud::eval::{ablation_suite, EvalConfig};
use kgfraud::kg::{generate_world, sample_profiles, ProfilesFile, Split, WorldGenConfig, PROFILES_FORMAT_VERSION};
use kgfraud::policy::PolicyConfig;
use kgfraud::training::{Dataset, TrainConfig};

fn main() -> anyhow::Result<()> {
    let wcfg = WorldGenConfig { entities_per_item: [16; 4], extent_m: 18_000.0, ..WorldGenConfig::default() };
    let world = generate_world(&wcfg, 5)?;
    let profiles = sample_profiles(&world, 48, 5)?;
    let split = Split::random(48, (32, 8, 8), 5)?;
    let data = Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed: 5, profiles, split })?;

    let train = TrainConfig {
        sl_epochs: 5,
        rl_epochs: 5,
        batch_applicants: 8,
        dev_repeats: 1,
        policy: PolicyConfig { hidden: 12, depth: None, scorer_hidden: 12, value_hidden: 12 },
        ..TrainConfig::default()
    };
    let eval = EvalConfig { repeats: 4, seed: 17, ..EvalConfig::default() };
    let report = ablation_suite(&data, &train, &eval, 5, |v, r| {
        if r.epoch % 5 == 0 {
            eprintln!("{v} epoch {} dev {:.3}", r.epoch, r.dev_accuracy);
        }
    })?;
    print!("{}", report.table_csv()?);
    Ok(())
}
