#![allow(dead_code)]

use kgfraud::kg::{generate_world, sample_profiles, ProfilesFile, Split, World, WorldGenConfig, PROFILES_FORMAT_VERSION};
use kgfraud::policy::{Policy, PolicyConfig, Variant};
use kgfraud::training::Dataset;

pub fn small_world_config() -> WorldGenConfig {
    WorldGenConfig { entities_per_item: [8, 8, 8, 8], extent_m: 12_000.0, ..WorldGenConfig::default() }
}

pub fn small_world(seed: u64) -> World {
    generate_world(&small_world_config(), seed).unwrap()
}

pub fn small_data(seed: u64, n: usize) -> Dataset {
    let world = small_world(seed);
    let profiles = sample_profiles(&world, n, seed).unwrap();
    let split = Split::random(n, (n / 2, n / 4, n - n / 2 - n / 4), seed).unwrap();
    Dataset::new(world, ProfilesFile { format_version: PROFILES_FORMAT_VERSION, seed, profiles, split }).unwrap()
}

pub fn small_policy_config() -> PolicyConfig {
    PolicyConfig { hidden: 8, depth: None, scorer_hidden: 8, value_hidden: 8 }
}

pub fn small_policy(variant: Variant, seed: u64) -> Policy {
    Policy::new(variant, small_policy_config(), seed)
}
