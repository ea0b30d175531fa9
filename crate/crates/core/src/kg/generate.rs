//! Synthetic world generation.
//!
//! Personal-information entities are scattered over a square map; each gets
//! a disc of POIs around it. Triplets follow the map-completion rules: the
//! nearest POI of every type within the search radius, two adjacency
//! triplets for every pair of positioned entities closer than the adjacency
//! threshold, and attribute triplets towards shared attribute-value entities.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::vocab::{self, POI_TYPES};
use super::{Category, Entity, EntityId, Item, Triplet, World, WORLD_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldGenConfig {
    /// Personal-information entities per item, in School/Company/Residence/BirthPlace order.
    pub entities_per_item: [usize; 4],
    /// Side of the square map, meters.
    pub extent_m: f64,
    /// Radius of the disc of POIs placed around each personal entity.
    pub poi_disc_m: f64,
    pub pois_per_entity: (usize, usize),
    /// Probability that a POI is placed next to the previous POI of its disc.
    pub poi_cluster_prob: f64,
    pub poi_cluster_m: f64,
    /// Radius for nearest-POI-per-type triplets.
    pub poi_search_m: f64,
    /// Distance below which two positioned entities are adjacent.
    pub adjacency_m: f64,
    pub attribute_prob: f64,
    pub freq_min: u64,
    pub freq_max: u64,
    pub min_head_triplets: usize,
    pub retry_budget: usize,
    /// POI count multiplier applied on every retry.
    pub retry_density: f64,
}

impl Default for WorldGenConfig {
    fn default() -> Self {
        WorldGenConfig {
            entities_per_item: [60, 60, 60, 60],
            extent_m: 40_000.0,
            poi_disc_m: 1_200.0,
            pois_per_entity: (4, 8),
            poi_cluster_prob: 0.3,
            poi_cluster_m: 90.0,
            poi_search_m: 1_000.0,
            adjacency_m: 100.0,
            attribute_prob: 0.8,
            freq_min: 10,
            freq_max: 10_000_000,
            min_head_triplets: 4,
            retry_budget: 4,
            retry_density: 1.5,
        }
    }
}

impl WorldGenConfig {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("world config: {m}")));
        if self.entities_per_item.iter().any(|&n| n == 0) {
            return bad("every item needs at least one entity");
        }
        if self.pois_per_entity.0 > self.pois_per_entity.1 {
            return bad("pois_per_entity min exceeds max");
        }
        if !(self.freq_min >= 1 && self.freq_min <= self.freq_max) {
            return bad("freq bounds must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.poi_cluster_prob) || !(0.0..=1.0).contains(&self.attribute_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.extent_m <= 0.0 || self.poi_disc_m < 0.0 || self.poi_search_m < 0.0 || self.adjacency_m < 0.0 {
            return bad("distances must be non-negative");
        }
        Ok(())
    }
}

/// Generate a world; retries with denser POIs until every personal entity
/// heads at least `min_head_triplets` triplets.
pub fn generate_world(config: &WorldGenConfig, seed: u64) -> Result<World> {
    config.check()?;
    let mut density = 1.0;
    for attempt in 0..=config.retry_budget {
        let world = generate_once(config, seed, attempt as u64, density);
        let counts = world.head_counts();
        let short = world
            .entities
            .iter()
            .filter(|e| e.category.item().is_some())
            .filter(|e| counts[e.id as usize] < config.min_head_triplets)
            .count();
        if short == 0 {
            return Ok(world);
        }
        density *= config.retry_density;
    }
    Err(Error::WorldGeneration(format!(
        "some personal entities still head fewer than {} triplets after {} retries",
        config.min_head_triplets, config.retry_budget
    )))
}

struct Builder {
    entities: Vec<Entity>,
    names: HashSet<String>,
    values: HashMap<String, EntityId>,
}

impl Builder {
    fn add(&mut self, base: String, category: Category, position: Option<[f64; 2]>) -> EntityId {
        self.add_typed(base, category, position, None)
    }

    fn add_typed(
        &mut self,
        base: String,
        category: Category,
        position: Option<[f64; 2]>,
        poi_type: Option<u16>,
    ) -> EntityId {
        let mut name = base.clone();
        let mut n = 2;
        while !self.names.insert(name.clone()) {
            name = format!("{base} No.{n}");
            n += 1;
        }
        let id = self.entities.len() as EntityId;
        self.entities.push(Entity { id, name, category, position, poi_type });
        id
    }

    fn value(&mut self, name: String) -> EntityId {
        if let Some(&id) = self.values.get(&name) {
            return id;
        }
        let id = self.add(name.clone(), Category::AttributeValue, None);
        self.values.insert(name, id);
        id
    }
}

fn proper_noun(rng: &mut Rng) -> String {
    let a = vocab::SYLLABLES[rng.gen_range(0..vocab::SYLLABLES.len())];
    let b = vocab::SYLLABLES[rng.gen_range(0..vocab::SYLLABLES.len())].to_lowercase();
    format!("{a}{b}")
}

fn pick<'a>(rng: &mut Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn attribute_value(rng: &mut Rng, relation: &str) -> String {
    match relation {
        "LocatedIn" => pick(rng, &vocab::CITIES).to_string(),
        "FoundedDate" => rng.gen_range(1890..=2015).to_string(),
        "BuiltYear" => rng.gen_range(1980..=2020).to_string(),
        "Founder" => format!("{} {}", pick(rng, &vocab::SURNAMES), proper_noun(rng)),
        "Industry" => pick(rng, &vocab::INDUSTRIES).to_string(),
        "Developer" => format!("{} Real Estate", proper_noun(rng)),
        "Province" => pick(rng, &vocab::PROVINCES).to_string(),
        "Dialect" => format!("{} Chinese", pick(rng, &vocab::DIALECTS)),
        "PostalCode" => format!("{:06}", rng.gen_range(100_000..=999_999)),
        other => unreachable!("unknown attribute {other}"),
    }
}

fn log_uniform(rng: &mut Rng, lo: u64, hi: u64) -> u64 {
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    let x = 10f64.powf(a + (b - a) * rng.gen::<f64>()).round() as u64;
    x.clamp(lo, hi)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform spatial hash over positioned entities.
struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<EntityId>>,
}

impl Grid {
    fn new(cell: f64, entities: &[Entity], filter: impl Fn(&Entity) -> bool) -> Grid {
        let cell = cell.max(1.0);
        let mut cells: HashMap<(i64, i64), Vec<EntityId>> = HashMap::new();
        for e in entities.iter().filter(|e| filter(e)) {
            if let Some(p) = e.position {
                cells.entry(Self::key(cell, p)).or_default().push(e.id);
            }
        }
        Grid { cell, cells }
    }

    fn key(cell: f64, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    /// Ids within `radius` of `p` (radius must not exceed the cell size), ascending.
    fn near(&self, p: [f64; 2]) -> Vec<EntityId> {
        let (cx, cy) = Self::key(self.cell, p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend_from_slice(ids);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// For `(type, distance, id)` candidates, keep the nearest id of each type
/// within `radius` (ties go to the lower id).
pub(crate) fn nearest_per_type(
    candidates: impl IntoIterator<Item = (usize, f64, EntityId)>,
    radius: f64,
) -> BTreeMap<usize, EntityId> {
    let mut best: BTreeMap<usize, (f64, EntityId)> = BTreeMap::new();
    for (ty, d, id) in candidates {
        if d > radius {
            continue;
        }
        let better = match best.get(&ty) {
            Some(&(bd, bid)) => d < bd || (d == bd && id < bid),
            None => true,
        };
        if better {
            best.insert(ty, (d, id));
        }
    }
    best.into_iter().map(|(ty, (_, id))| (ty, id)).collect()
}

fn generate_once(config: &WorldGenConfig, seed: u64, attempt: u64, density: f64) -> World {
    let mut rng = rng::stream(seed, &[0x3031d, attempt]);
    let mut b = Builder {
        entities: Vec::new(),
        names: HashSet::new(),
        values: HashMap::new(),
    };
    let mut personal = Vec::new();
    for item in Item::ALL {
        for _ in 0..config.entities_per_item[item.index()] {
            let suffix = pick(&mut rng, vocab::item_suffix(item));
            let name = format!("{} {}", proper_noun(&mut rng), suffix);
            let pos = [rng.gen::<f64>() * config.extent_m, rng.gen::<f64>() * config.extent_m];
            personal.push((b.add(name, item.into(), Some(pos)), item));
        }
    }

    let mut poi_type: BTreeMap<EntityId, usize> = BTreeMap::new();
    let (lo, hi) = config.pois_per_entity;
    for &(pid, _) in &personal {
        let centre = b.entities[pid as usize].position.expect("personal entity has position");
        let n = ((rng.gen_range(lo..=hi) as f64) * density).round() as usize;
        let mut prev: Option<[f64; 2]> = None;
        for _ in 0..n {
            let ty = rng.gen_range(0..POI_TYPES.len());
            let pos = match prev {
                Some(p) if rng.gen_bool(config.poi_cluster_prob) => {
                    let r = config.poi_cluster_m * rng.gen::<f64>().sqrt();
                    let th = rng.gen::<f64>() * std::f64::consts::TAU;
                    [p[0] + r * th.cos(), p[1] + r * th.sin()]
                }
                _ => {
                    let r = config.poi_disc_m * rng.gen::<f64>().sqrt();
                    let th = rng.gen::<f64>() * std::f64::consts::TAU;
                    [centre[0] + r * th.cos(), centre[1] + r * th.sin()]
                }
            };
            prev = Some(pos);
            let name = format!("{} {}", proper_noun(&mut rng), vocab::poi_suffix(ty));
            let id = b.add_typed(name, Category::Poi, Some(pos), Some(vocab::poi_relation(ty)));
            poi_type.insert(id, ty);
        }
    }

    // Attribute values are drawn before positions are scanned so the draw
    // order does not depend on geometry.
    let mut attr_triplets = Vec::new();
    for &(pid, item) in &personal {
        for &rel in vocab::item_attributes(item) {
            if rng.gen_bool(config.attribute_prob) {
                let value = attribute_value(&mut rng, rel);
                let tail = b.value(value);
                attr_triplets.push((pid, vocab::attribute_relation(rel), tail));
            }
        }
    }

    let entities = b.entities;
    let mut triplets = Vec::new();
    let freq = |rng: &mut Rng| log_uniform(rng, config.freq_min, config.freq_max);

    let poi_grid = Grid::new(config.poi_search_m, &entities, |e| e.category == Category::Poi);
    for &(pid, _) in &personal {
        let p = entities[pid as usize].position.unwrap();
        let candidates = poi_grid
            .near(p)
            .into_iter()
            .map(|q| (poi_type[&q], dist(p, entities[q as usize].position.unwrap()), q));
        for (ty, q) in nearest_per_type(candidates, config.poi_search_m) {
            triplets.push(Triplet { head: pid, relation: vocab::poi_relation(ty), tail: q, freq: freq(&mut rng) });
        }
        for &(h, r, t) in attr_triplets.iter().filter(|(h, _, _)| *h == pid) {
            triplets.push(Triplet { head: h, relation: r, tail: t, freq: freq(&mut rng) });
        }
    }

    let adj = vocab::adjacency_relation();
    let all_grid = Grid::new(config.adjacency_m, &entities, |e| e.position.is_some());
    for a in entities.iter().filter(|e| e.position.is_some()) {
        let pa = a.position.unwrap();
        for bid in all_grid.near(pa) {
            if bid <= a.id {
                continue;
            }
            if dist(pa, entities[bid as usize].position.unwrap()) < config.adjacency_m {
                triplets.push(Triplet { head: a.id, relation: adj, tail: bid, freq: freq(&mut rng) });
                triplets.push(Triplet { head: bid, relation: adj, tail: a.id, freq: freq(&mut rng) });
            }
        }
    }

    World {
        format_version: WORLD_FORMAT_VERSION,
        rng_seed: seed,
        config: config.clone(),
        relations: vocab::relations(),
        entities,
        triplets,
    }
}
