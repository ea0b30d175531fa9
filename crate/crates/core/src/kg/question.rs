//! Rendering triplets into four-option multiple-choice questions.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{EntityId, Triplet, World};
use crate::error::{Error, Result};
use crate::rng;

/// The fixed fourth option.
pub const ABSTAIN_OPTION: &str = "I am not quite clear.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
    D,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::A, Label::B, Label::C, Label::D];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Label::A),
            "B" => Ok(Label::B),
            "C" => Ok(Label::C),
            "D" => Ok(Label::D),
            other => Err(Error::Invalid(format!("unknown option label `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub triplet: Triplet,
    pub text: String,
    /// Options A–D; D is always [`ABSTAIN_OPTION`].
    pub options: [String; 4],
    pub correct_label: Label,
}

impl Question {
    pub fn option(&self, label: Label) -> &str {
        &self.options[label.index()]
    }
}

pub fn render_question(world: &World, triplet: &Triplet, seed: u64) -> Result<Question> {
    let head = world
        .entities
        .get(triplet.head as usize)
        .ok_or_else(|| Error::Invalid(format!("triplet head {} missing", triplet.head)))?;
    if head.category.item().is_none() {
        return Err(Error::Invalid(format!("{} is not a personal-information entity", head.name)));
    }
    let tail = world.entity(triplet.tail);
    let relation = world.relation(triplet.relation);
    let text = relation.template.replace("{head}", &head.name);

    let mut rng = rng::stream(seed, &[triplet.head as u64, triplet.relation as u64, triplet.tail as u64]);
    let usable = |id: EntityId| {
        id != triplet.tail && id != triplet.head && world.entity(id).name != tail.name
    };
    let same_relation: BTreeSet<EntityId> = world
        .triplets
        .iter()
        .filter(|t| t.relation == triplet.relation && usable(t.tail))
        .map(|t| t.tail)
        .collect();
    let mut pool: Vec<EntityId> = same_relation.into_iter().collect();
    pool.shuffle(&mut rng);
    let mut chosen: Vec<EntityId> = Vec::with_capacity(2);
    for id in pool {
        if chosen.len() == 2 {
            break;
        }
        if chosen.iter().all(|&c| world.entity(c).name != world.entity(id).name) {
            chosen.push(id);
        }
    }
    if chosen.len() < 2 {
        let mut fallback: Vec<EntityId> = world
            .entities
            .iter()
            .filter(|e| e.category == tail.category && usable(e.id) && !chosen.contains(&e.id))
            .map(|e| e.id)
            .collect();
        fallback.shuffle(&mut rng);
        for id in fallback {
            if chosen.len() == 2 {
                break;
            }
            if chosen.iter().all(|&c| world.entity(c).name != world.entity(id).name) {
                chosen.push(id);
            }
        }
    }
    if chosen.len() < 2 {
        return Err(Error::Invalid(format!(
            "cannot find two distractors for ({}, {}, {})",
            head.name, relation.name, tail.name
        )));
    }
    let mut abc = [tail.name.clone(), world.entity(chosen[0]).name.clone(), world.entity(chosen[1]).name.clone()];
    abc.shuffle(&mut rng);
    let correct = abc.iter().position(|n| *n == tail.name).expect("true tail among options");
    let [a, b, c] = abc;
    Ok(Question {
        triplet: *triplet,
        text,
        options: [a, b, c, ABSTAIN_OPTION.to_string()],
        correct_label: Label::ALL[correct],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::fixtures::tiny_world;
    use crate::kg::{generate_world, vocab, Category, Entity, WorldGenConfig};

    #[test]
    fn founded_date_question() {
        let mut world = tiny_world();
        world.entities[0].name = "Nanjing University".into();
        world.entities[10].name = "1902".into();
        // Give FoundedDate some other tails to draw from.
        for (i, year) in ["1950", "1988"].iter().enumerate() {
            let id = world.entities.len() as EntityId;
            world.entities.push(Entity { id, name: year.to_string(), category: Category::AttributeValue, position: None, poi_type: None });
            world.triplets.push(Triplet { head: 1 + i as u32, relation: vocab::attribute_relation("FoundedDate"), tail: id, freq: 10 });
        }
        let t = *world.triplets.iter().find(|t| t.head == 0 && t.relation == vocab::attribute_relation("FoundedDate")).unwrap();
        let q = render_question(&world, &t, 4).unwrap();
        assert_eq!(q.text, "When was Nanjing University founded?");
        assert_eq!(q.option(q.correct_label), "1902");
        assert_ne!(q.correct_label, Label::D);
        assert_eq!(q.options[3], ABSTAIN_OPTION);
        let mut names = q.options[..3].to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 3);
    }

    #[test]
    fn distractors_never_equal_true_tail_and_order_is_seeded() {
        let world = generate_world(&WorldGenConfig { entities_per_item: [10, 10, 10, 10], extent_m: 12_000.0, ..Default::default() }, 1).unwrap();
        let heads: Vec<_> = world.triplets.iter().filter(|t| world.entity(t.head).category.item().is_some()).take(200).collect();
        for t in heads {
            let q = render_question(&world, t, 99).unwrap();
            let tail = &world.entity(t.tail).name;
            assert_eq!(&q.options[q.correct_label.index()], tail);
            assert_eq!(q.options.iter().filter(|o| *o == tail).count(), 1);
            assert_eq!(q, render_question(&world, t, 99).unwrap());
        }
    }

    #[test]
    fn labels_cover_all_positions_across_seeds() {
        let world = tiny_world();
        let t = world.triplets[0];
        let labels: BTreeSet<_> = (0..64).map(|s| render_question(&world, &t, s).unwrap().correct_label).collect();
        assert_eq!(labels.len(), 3);
    }

    #[test]
    fn context_triplet_is_not_askable() {
        let world = tiny_world();
        let t = world.triplets[7];
        assert!(render_question(&world, &t, 0).is_err());
    }

    #[test]
    fn fails_without_distractors() {
        let mut world = tiny_world();
        world.entities.truncate(11);
        world.triplets.retain(|t| t.head < 11 && t.tail < 11);
        world.entities[9].category = Category::AttributeValue;
        let t = *world.triplets.iter().find(|t| t.relation == vocab::attribute_relation("LocatedIn")).unwrap();
        // Only two attribute values exist: the tail itself and one other.
        assert!(render_question(&world, &t, 0).is_err());
    }

    #[test]
    fn label_parsing() {
        assert_eq!("d".parse::<Label>().unwrap(), Label::D);
        assert!("E".parse::<Label>().is_err());
    }
}
