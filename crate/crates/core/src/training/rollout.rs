//! Playing episodes with rules or policies.

use crate::dialogue::DialogueGraph;
use crate::episode::{self, Controller, Episode, Limits, Mode};
use crate::error::Result;
use crate::policy::{Policy, PolicyController};
use crate::rng;
use crate::rules::{FlatRule, HierarchicalRule};
use crate::simulator::{SimApplicant, SimResponder};

use super::rewards::{assign_rewards, RewardConfig, Trajectory, Truth};

/// What drives an episode.
#[derive(Clone, Copy, Debug)]
pub enum Driver<'p> {
    FlatRule,
    HierarchicalRule,
    Greedy(&'p Policy),
    Sample(&'p Policy),
}

impl Driver<'_> {
    pub fn mode(&self) -> Mode {
        match self {
            Driver::FlatRule => Mode::Flat,
            Driver::HierarchicalRule => Mode::Hierarchical,
            Driver::Greedy(p) | Driver::Sample(p) => p.variant.mode(),
        }
    }
}

/// Plays one episode to the end; `seed` drives the rule or policy sampling.
pub fn play(driver: Driver<'_>, graph: DialogueGraph, applicant: &SimApplicant, limits: Limits, seed: u64) -> Result<Episode> {
    let mut ep = Episode::new(graph, driver.mode(), limits);
    let mut responder = SimResponder { applicant };
    let mut controller: Box<dyn Controller + '_> = match driver {
        Driver::FlatRule => Box::new(FlatRule::new(seed)),
        Driver::HierarchicalRule => Box::new(HierarchicalRule::new(seed)),
        Driver::Greedy(p) => Box::new(PolicyController::greedy(p)),
        Driver::Sample(p) => Box::new(PolicyController::sampling(p, rng::seeded(seed))),
    };
    episode::run(&mut ep, controller.as_mut(), &mut responder)?;
    Ok(ep)
}

/// Plays an episode and scores it.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    driver: Driver<'_>,
    graph: DialogueGraph,
    applicant: &SimApplicant,
    limits: Limits,
    rewards: &RewardConfig,
    seed: u64,
    profile: usize,
) -> Result<Trajectory> {
    let ep = play(driver, graph, applicant, limits, seed)?;
    assign_rewards(&ep, Truth::of(applicant), profile, rewards)
}
