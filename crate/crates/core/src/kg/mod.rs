//! Knowledge-graph data model, personal KGs and world/profile files.

mod generate;
mod question;
pub mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use generate::{generate_world, WorldGenConfig};
pub use question::{render_question, Label, Question, ABSTAIN_OPTION};

pub type EntityId = u32;
pub type RelationId = u16;

pub const WORLD_FORMAT_VERSION: u32 = 1;
pub const PROFILES_FORMAT_VERSION: u32 = 1;

/// The four personal-information items of a loan application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Item {
    School,
    Company,
    Residence,
    BirthPlace,
}

impl Item {
    pub const ALL: [Item; 4] = [Item::School, Item::Company, Item::Residence, Item::BirthPlace];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Item> {
        Item::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Item::School => "School",
            Item::Company => "Company",
            Item::Residence => "Residence",
            Item::BirthPlace => "BirthPlace",
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Item {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Item::ALL
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown item `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    School,
    Company,
    Residence,
    BirthPlace,
    Poi,
    AttributeValue,
}

impl Category {
    pub fn item(self) -> Option<Item> {
        match self {
            Category::School => Some(Item::School),
            Category::Company => Some(Item::Company),
            Category::Residence => Some(Item::Residence),
            Category::BirthPlace => Some(Item::BirthPlace),
            _ => None,
        }
    }

    pub fn needs_position(self) -> bool {
        self != Category::AttributeValue
    }
}

impl From<Item> for Category {
    fn from(item: Item) -> Self {
        match item {
            Item::School => Category::School,
            Item::Company => Category::Company,
            Item::Residence => Category::Residence,
            Item::BirthPlace => Category::BirthPlace,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Poi,
    Adjacency,
    Attribute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelationId,
    pub name: String,
    /// Question template with a `{head}` placeholder.
    pub template: String,
    pub kind: RelationKind,
    /// Inverse relation for adjacency relations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<RelationId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub category: Category,
    /// Planar coordinates in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
    /// POI type (a POI relation id) for POI entities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poi_type: Option<RelationId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    /// Search-result count used as the spread degree of the fact.
    pub freq: u64,
}

impl Triplet {
    /// Identity of the fact, ignoring its frequency.
    pub fn key(&self) -> (EntityId, RelationId, EntityId) {
        (self.head, self.relation, self.tail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub format_version: u32,
    pub rng_seed: u64,
    pub config: WorldGenConfig,
    pub relations: Vec<Relation>,
    pub entities: Vec<Entity>,
    pub triplets: Vec<Triplet>,
}

impl World {
    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id as usize]
    }

    pub fn relation(&self, id: RelationId) -> &Relation {
        &self.relations[id as usize]
    }

    pub fn entities_of(&self, category: Category) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(move |e| e.category == category)
    }

    /// Number of triplets headed by each entity.
    pub fn head_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.entities.len()];
        for t in &self.triplets {
            counts[t.head as usize] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != WORLD_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "world",
                found: self.format_version,
                expected: WORLD_FORMAT_VERSION,
            });
        }
        for (i, r) in self.relations.iter().enumerate() {
            if r.id as usize != i {
                return Err(Error::Invalid(format!("relation {} stored at index {i}", r.id)));
            }
        }
        for (i, e) in self.entities.iter().enumerate() {
            if e.id as usize != i {
                return Err(Error::Invalid(format!("entity {} stored at index {i}", e.id)));
            }
            if e.category.needs_position() && e.position.is_none() {
                return Err(Error::Invalid(format!("entity {} ({}) has no position", e.id, e.name)));
            }
        }
        let n_ent = self.entities.len() as u64;
        let n_rel = self.relations.len() as u64;
        let mut keys = BTreeSet::new();
        for t in &self.triplets {
            if t.head as u64 >= n_ent || t.tail as u64 >= n_ent || t.relation as u64 >= n_rel {
                return Err(Error::Invalid(format!("triplet {t:?} references a missing id")));
            }
            if t.head == t.tail {
                return Err(Error::Invalid(format!("triplet {t:?} is a self loop")));
            }
            if t.freq == 0 {
                return Err(Error::Invalid(format!("triplet {t:?} has zero freq")));
            }
            keys.insert(t.key());
        }
        for t in &self.triplets {
            if let Some(inv) = self.relation(t.relation).inverse {
                if !keys.contains(&(t.tail, inv, t.head)) {
                    return Err(Error::Invalid(format!("adjacency triplet {t:?} has no reverse")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn from_json(text: &str) -> Result<World> {
        let world: World = serde_json::from_str(text)?;
        world.validate()?;
        Ok(world)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<World> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        World::from_json(&text).map_err(|e| Error::parse(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonalProfile {
    pub applicant_id: u32,
    pub items: BTreeMap<Item, EntityId>,
}

impl PersonalProfile {
    pub fn new(applicant_id: u32, items: [EntityId; 4]) -> Self {
        PersonalProfile {
            applicant_id,
            items: Item::ALL.into_iter().zip(items).collect(),
        }
    }

    pub fn item(&self, item: Item) -> EntityId {
        self.items[&item]
    }

    pub fn entities(&self) -> [EntityId; 4] {
        Item::ALL.map(|i| self.item(i))
    }

    pub fn validate(&self, world: &World) -> Result<()> {
        if self.items.len() != 4 {
            return Err(Error::Invalid(format!(
                "profile {} has {} items, expected 4",
                self.applicant_id,
                self.items.len()
            )));
        }
        for (&item, &id) in &self.items {
            let ent = world
                .entities
                .get(id as usize)
                .ok_or_else(|| Error::Invalid(format!("profile {}: entity {id} missing", self.applicant_id)))?;
            if ent.category != Category::from(item) {
                return Err(Error::Invalid(format!(
                    "profile {}: entity {id} is {:?}, not {item}",
                    self.applicant_id, ent.category
                )));
            }
        }
        Ok(())
    }
}

/// Train/dev/test partition of a profile list, by index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Shuffle `0..n` and cut it into consecutive train/dev/test blocks.
    pub fn random(n: usize, sizes: (usize, usize, usize), seed: u64) -> Result<Split> {
        let (a, b, c) = sizes;
        if a + b + c > n {
            return Err(Error::Invalid(format!("split {a}/{b}/{c} exceeds {n} profiles")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = rng::stream(seed, &[0x5711]);
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        Ok(Split {
            train: idx[..a].to_vec(),
            dev: idx[a..a + b].to_vec(),
            test: idx[a + b..a + b + c].to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilesFile {
    pub format_version: u32,
    pub seed: u64,
    pub profiles: Vec<PersonalProfile>,
    #[serde(default)]
    pub split: Split,
}

impl ProfilesFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ProfilesFile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ProfilesFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        if file.format_version != PROFILES_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "profiles",
                found: file.format_version,
                expected: PROFILES_FORMAT_VERSION,
            });
        }
        Ok(file)
    }
}

/// Sample `n` profiles, one entity per item drawn uniformly from the world.
pub fn sample_profiles(world: &World, n: usize, seed: u64) -> Result<Vec<PersonalProfile>> {
    let pools: Vec<Vec<EntityId>> = Item::ALL
        .iter()
        .map(|&item| world.entities_of(item.into()).map(|e| e.id).collect())
        .collect();
    for (item, pool) in Item::ALL.iter().zip(&pools) {
        if pool.is_empty() {
            return Err(Error::Invalid(format!("world has no {item} entities")));
        }
    }
    let mut rng = rng::stream(seed, &[0x9e0f]);
    Ok((0..n)
        .map(|i| {
            let ids = [0, 1, 2, 3].map(|k| pools[k][rng.gen_range(0..pools[k].len())]);
            PersonalProfile::new(i as u32, ids)
        })
        .collect())
}

/// Triplets crawled for one applicant: the askable head-triplets of the four
/// claimed entities, plus adjacency/attribute triplets linking their tails.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonalKg {
    pub profile: PersonalProfile,
    pub askable: Vec<Triplet>,
    pub context: Vec<Triplet>,
}

impl PersonalKg {
    pub fn all(&self) -> impl Iterator<Item = &Triplet> {
        self.askable.iter().chain(self.context.iter())
    }

    pub fn len(&self) -> usize {
        self.askable.len() + self.context.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_askable(&self, t: &Triplet) -> bool {
        self.askable.iter().any(|a| a.key() == t.key())
    }

    /// Item whose entity heads the triplet, if any.
    pub fn head_item(&self, t: &Triplet) -> Option<Item> {
        Item::ALL.into_iter().find(|&i| self.profile.item(i) == t.head)
    }
}

pub fn personal_kg(world: &World, profile: &PersonalProfile) -> PersonalKg {
    let heads: BTreeSet<EntityId> = profile.items.values().copied().collect();
    let askable: Vec<Triplet> = world
        .triplets
        .iter()
        .filter(|t| heads.contains(&t.head))
        .copied()
        .collect();
    let tails: BTreeSet<EntityId> = askable.iter().map(|t| t.tail).collect();
    let context = world
        .triplets
        .iter()
        .filter(|t| {
            !heads.contains(&t.head)
                && tails.contains(&t.head)
                && tails.contains(&t.tail)
                && world.relation(t.relation).kind != RelationKind::Poi
        })
        .copied()
        .collect();
    PersonalKg {
        profile: profile.clone(),
        askable,
        context,
    }
}

/// Mean freq over the askable triplets whose tail is `answer`.
pub fn spread_degree(pkg: &PersonalKg, answer: EntityId) -> Result<f64> {
    let (sum, n) = pkg
        .askable
        .iter()
        .filter(|t| t.tail == answer)
        .fold((0.0, 0usize), |(s, n), t| (s + t.freq as f64, n + 1));
    if n == 0 {
        return Err(Error::Invalid(format!("entity {answer} is not the tail of an askable triplet")));
    }
    Ok(sum / n as f64)
}
