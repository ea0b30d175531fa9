//! A world with its profiles, prepared once for repeated episodes.

use crate::dialogue::{build_graph, DialogueGraph, Topology};
use crate::error::{Error, Result};
use crate::kg::{personal_kg, PersonalKg, PersonalProfile, ProfilesFile, Split, World};
use crate::simulator::{sample_applicant, SimApplicant, SimConfig};

pub struct Dataset {
    pub world: World,
    pub profiles: Vec<PersonalProfile>,
    pub split: Split,
    kgs: Vec<PersonalKg>,
    graphs: Vec<DialogueGraph>,
}

impl Dataset {
    pub fn new(world: World, profiles: ProfilesFile) -> Result<Self> {
        let mut kgs = Vec::with_capacity(profiles.profiles.len());
        let mut graphs = Vec::with_capacity(profiles.profiles.len());
        for p in &profiles.profiles {
            p.validate(&world)?;
            let kg = personal_kg(&world, p);
            let g = build_graph(&kg)?;
            kgs.push(kg);
            graphs.push(g);
        }
        let n = profiles.profiles.len();
        for &i in profiles.split.train.iter().chain(&profiles.split.dev).chain(&profiles.split.test) {
            if i >= n {
                return Err(Error::Invalid(format!("split refers to profile {i} but only {n} exist")));
            }
        }
        Ok(Dataset { world, profiles: profiles.profiles, split: profiles.split, kgs, graphs })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn kg(&self, i: usize) -> &PersonalKg {
        &self.kgs[i]
    }

    /// A fresh dialogue graph for profile `i`.
    pub fn graph(&self, i: usize) -> DialogueGraph {
        self.graphs[i].clone()
    }

    pub fn topology(&self, i: usize) -> &Topology {
        self.graphs[i].topology()
    }

    pub fn applicant(&self, i: usize, sim: &SimConfig, seed: u64) -> SimApplicant {
        sample_applicant(&self.kgs[i], sim, seed)
    }

    /// Index of a profile by applicant id.
    pub fn by_applicant(&self, id: u32) -> Option<usize> {
        self.profiles.iter().position(|p| p.applicant_id == id)
    }
}
