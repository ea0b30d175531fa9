//! Heuristic applicant simulator.
//!
//! An applicant is a fraudster or not; a fraudster fakes one to four of the
//! four items. Every personal-KG triplet is known with a probability read off
//! a curve of its frequency (the fake curve when its governing item is fake),
//! then knowledge is closed under the triangle rule: if two sides of a
//! triangle of facts are known, so is the third.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::episode::{Decision, Responder};
use crate::error::{Error, Result};
use crate::kg::{EntityId, Item, Label, PersonalKg, PersonalProfile, Question, RelationId, Triplet};
use crate::rng;

pub const FREQ_BINS: usize = 8;

/// `floor(log10 freq)` clamped to `0..=7`.
pub fn freq_bin(freq: u64) -> usize {
    if freq < 10 {
        return 0;
    }
    ((freq as f64).log10().floor() as usize).min(FREQ_BINS - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeCurves {
    pub genuine: [f64; FREQ_BINS],
    pub fake: [f64; FREQ_BINS],
}

impl Default for KnowledgeCurves {
    fn default() -> Self {
        let genuine = std::array::from_fn(|b| (0.35 + 0.09 * b as f64).clamp(0.0, 0.95));
        let fake = std::array::from_fn(|b| (0.02 + 0.065 * b as f64).clamp(0.0, 0.70));
        KnowledgeCurves { genuine, fake }
    }
}

impl KnowledgeCurves {
    pub fn constant(p: f64) -> Self {
        KnowledgeCurves { genuine: [p; FREQ_BINS], fake: [p; FREQ_BINS] }
    }

    pub fn p(&self, fake: bool, freq: u64) -> f64 {
        let b = freq_bin(freq);
        if fake {
            self.fake[b]
        } else {
            self.genuine[b]
        }
    }

    pub fn check(&self) -> Result<()> {
        for c in [&self.genuine, &self.fake] {
            if c.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Invalid("knowledge curve values must lie in [0, 1]".into()));
            }
            if c.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Invalid("knowledge curves must be nondecreasing".into()));
            }
        }
        if self.genuine.iter().zip(&self.fake).any(|(g, f)| g < f) {
            return Err(Error::Invalid("genuine curve must dominate the fake curve".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub p_fraud: f64,
    /// Relative weights of faking 1, 2, 3 or 4 items.
    pub fake_count_weights: [f64; 4],
    /// Relative weights of School, Company, Residence, BirthPlace being faked.
    pub item_weights: [f64; 4],
    pub curves: KnowledgeCurves,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            p_fraud: 0.5,
            fake_count_weights: [1.0; 4],
            item_weights: [2.0, 2.0, 1.0, 1.0],
            curves: KnowledgeCurves::default(),
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_fraud) {
            return Err(Error::Invalid(format!("p_fraud {} outside [0, 1]", self.p_fraud)));
        }
        if self.item_weights.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
            return Err(Error::Invalid("item weights must be positive".into()));
        }
        if self.fake_count_weights.iter().any(|&w| w < 0.0 || !w.is_finite())
            || self.fake_count_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Invalid("fake-count weights must be nonnegative and not all zero".into()));
        }
        self.curves.check()
    }
}

/// Which item's curve a triplet is drawn from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Governing {
    Item(Item),
    /// A fact between answer entities, supporting these items.
    Context(BTreeSet<Item>),
}

pub fn governing_item(pkg: &PersonalKg, triplet: &Triplet) -> Governing {
    if let Some(item) = pkg.head_item(triplet) {
        return Governing::Item(item);
    }
    let support = pkg
        .askable
        .iter()
        .filter(|a| a.tail == triplet.head || a.tail == triplet.tail)
        .filter_map(|a| pkg.head_item(a))
        .collect();
    Governing::Context(support)
}

/// A fact uses the fake curve only if every item it supports is fake.
pub fn governed_by_fake(g: &Governing, fake_items: &BTreeSet<Item>) -> bool {
    match g {
        Governing::Item(i) => fake_items.contains(i),
        Governing::Context(s) => !s.is_empty() && s.iter().all(|i| fake_items.contains(i)),
    }
}

pub type TripletKey = (EntityId, RelationId, EntityId);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimApplicant {
    pub profile: PersonalProfile,
    pub identity: Decision,
    pub fake_items: BTreeSet<Item>,
    /// Knowledge bit of every personal-KG triplet, sorted by key.
    pub knowledge: Vec<(Triplet, bool)>,
}

impl SimApplicant {
    pub fn is_fake(&self, item: Item) -> bool {
        self.fake_items.contains(&item)
    }

    /// True verdict for an item.
    pub fn item_truth(&self, item: Item) -> Decision {
        Decision::from_fraud(self.is_fake(item))
    }

    pub fn knows(&self, triplet: &Triplet) -> Result<bool> {
        let key = triplet.key();
        self.knowledge
            .binary_search_by_key(&key, |(t, _)| t.key())
            .map(|i| self.knowledge[i].1)
            .map_err(|_| Error::Invalid(format!("triplet {key:?} is not in the applicant's personal KG")))
    }

    pub fn n_known(&self) -> usize {
        self.knowledge.iter().filter(|(_, k)| *k).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Response {
    Correct(Label),
    Abstain,
}

impl Response {
    pub fn label(self) -> Label {
        match self {
            Response::Correct(l) => l,
            Response::Abstain => Label::D,
        }
    }
}

pub fn answer(applicant: &SimApplicant, q: &Question) -> Result<Response> {
    Ok(if applicant.knows(&q.triplet)? { Response::Correct(q.correct_label) } else { Response::Abstain })
}

fn weighted_index(weights: &[f64], rng: &mut rng::Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub fn sample_applicant(pkg: &PersonalKg, cfg: &SimConfig, seed: u64) -> SimApplicant {
    let mut r = rng::seeded(seed);
    let fraud = r.gen::<f64>() < cfg.p_fraud;
    let mut fake_items = BTreeSet::new();
    if fraud {
        let count = 1 + weighted_index(&cfg.fake_count_weights, &mut r);
        let mut w = cfg.item_weights;
        for _ in 0..count {
            let i = weighted_index(&w, &mut r);
            fake_items.insert(Item::ALL[i]);
            w[i] = 0.0;
        }
    }
    // One uniform per triplet in a fixed order, so curves can be compared on
    // the same draws.
    let triplets: Vec<Triplet> = pkg.all().copied().collect();
    let known: Vec<bool> = triplets
        .iter()
        .map(|t| {
            let u: f64 = r.gen();
            let fake = governed_by_fake(&governing_item(pkg, t), &fake_items);
            u < cfg.curves.p(fake, t.freq)
        })
        .collect();
    let edges: Vec<(EntityId, EntityId)> = triplets.iter().map(|t| (t.head, t.tail)).collect();
    let known = calibrate(&edges, &known);
    let mut knowledge: Vec<(Triplet, bool)> = triplets.into_iter().zip(known).collect();
    knowledge.sort_by_key(|(t, _)| t.key());
    knowledge.dedup_by_key(|(t, _)| t.key());
    SimApplicant { profile: pkg.profile.clone(), identity: Decision::from_fraud(fraud), fake_items, knowledge }
}

fn pair(a: EntityId, b: EntityId) -> (EntityId, EntityId) {
    (a.min(b), a.max(b))
}

/// Closes knowledge under the triangle rule over undirected entity pairs.
///
/// Knowledge is per unordered pair: a pair is known if any of its parallel
/// triplets is, and every triplet on a known pair ends up known. Only upgrades
/// happen, so the fixpoint does not depend on visiting order.
pub fn calibrate(edges: &[(EntityId, EntityId)], known: &[bool]) -> Vec<bool> {
    assert_eq!(edges.len(), known.len());
    let mut pairs: BTreeMap<(EntityId, EntityId), bool> = BTreeMap::new();
    for (&(a, b), &k) in edges.iter().zip(known) {
        if a != b {
            *pairs.entry(pair(a, b)).or_insert(false) |= k;
        }
    }
    let mut adj: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
    for &(a, b) in pairs.keys() {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut work: Vec<(EntityId, EntityId)> = pairs.iter().filter(|(_, &k)| k).map(|(&p, _)| p).collect();
    // Each newly known pair may complete triangles through a common neighbour.
    while let Some((a, b)) = work.pop() {
        let common: Vec<EntityId> = adj[&a].intersection(&adj[&b]).copied().collect();
        for c in common {
            let ac = pair(a, c);
            let bc = pair(b, c);
            let (kac, kbc) = (pairs[&ac], pairs[&bc]);
            let other = match (kac, kbc) {
                (true, false) => bc,
                (false, true) => ac,
                _ => continue,
            };
            pairs.insert(other, true);
            work.push(other);
        }
    }
    edges
        .iter()
        .zip(known)
        .map(|(&(a, b), &k)| k || (a != b && pairs[&pair(a, b)]))
        .collect()
}

/// Answers episode questions from an applicant's knowledge.
pub struct SimResponder<'a> {
    pub applicant: &'a SimApplicant,
}

impl Responder for SimResponder<'_> {
    fn respond(&mut self, _item: Item, triplet: &Triplet) -> Result<bool> {
        self.applicant.knows(triplet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::fixtures::{tiny_profile, tiny_world};
    use crate::kg::{personal_kg, render_question};
    use proptest::prelude::*;

    fn pkg() -> PersonalKg {
        personal_kg(&tiny_world(), &tiny_profile())
    }

    /// Closure by repeated scans over every triple of edges.
    pub(crate) fn brute_closure(edges: &[(EntityId, EntityId)], known: &[bool]) -> Vec<bool> {
        let n = edges.len();
        let key = |i: usize| pair(edges[i].0, edges[i].1);
        let mut k = known.to_vec();
        // Parallel edges share knowledge for detection.
        let pair_known = |k: &[bool], p: (EntityId, EntityId)| (0..n).any(|j| key(j) == p && k[j]);
        for i in 0..n {
            if edges[i].0 != edges[i].1 && pair_known(&k, key(i)) {
                k[i] = true;
            }
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let (p, q, r) = (key(i), key(j), key(l));
                        if p == q || q == r || p == r || edges[i].0 == edges[i].1 {
                            continue;
                        }
                        let mut nodes = vec![p.0, p.1, q.0, q.1, r.0, r.1];
                        nodes.sort();
                        nodes.dedup();
                        if nodes.len() != 3 {
                            continue;
                        }
                        if pair_known(&k, p) && pair_known(&k, q) && !pair_known(&k, r) {
                            for m in 0..n {
                                if key(m) == r {
                                    k[m] = true;
                                }
                            }
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return k;
            }
        }
    }

    pub(crate) fn triangles_with_two_known(edges: &[(EntityId, EntityId)], known: &[bool]) -> usize {
        let mut pairs: BTreeMap<(EntityId, EntityId), bool> = BTreeMap::new();
        for (&(a, b), &k) in edges.iter().zip(known) {
            if a != b {
                *pairs.entry(pair(a, b)).or_insert(false) |= k;
            }
        }
        let nodes: BTreeSet<EntityId> = pairs.keys().flat_map(|&(a, b)| [a, b]).collect();
        let nodes: Vec<EntityId> = nodes.into_iter().collect();
        let mut bad = 0;
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                for l in j + 1..nodes.len() {
                    let ps = [pair(nodes[i], nodes[j]), pair(nodes[j], nodes[l]), pair(nodes[i], nodes[l])];
                    if ps.iter().all(|p| pairs.contains_key(p)) && ps.iter().filter(|p| pairs[p]).count() == 2 {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }

    #[test]
    fn default_curves() {
        let c = KnowledgeCurves::default();
        c.check().unwrap();
        assert!((c.genuine[0] - 0.35).abs() < 1e-12);
        assert!((c.genuine[7] - 0.95).abs() < 1e-12);
        assert!((c.fake[7] - 0.475).abs() < 1e-12);
        assert!((c.fake[3] - 0.215).abs() < 1e-12);
        assert_eq!(freq_bin(9), 0);
        assert_eq!(freq_bin(10), 1);
        assert_eq!(freq_bin(999), 2);
        assert_eq!(freq_bin(10_000_000), 7);
        assert!(KnowledgeCurves { genuine: [0.1; 8], fake: [0.2; 8] }.check().is_err());
    }

    #[test]
    fn triangle_examples() {
        let tri = [(1, 2), (2, 3), (1, 3)];
        assert_eq!(calibrate(&tri, &[true, true, false]), vec![true; 3]);
        assert_eq!(calibrate(&tri, &[true, false, false]), vec![true, false, false]);
        // Two triangles sharing edge (2,3): {1,1,0} on the first, then the
        // upgraded shared edge and (3,4) close the second.
        let two = [(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)];
        let out = calibrate(&two, &[true, true, false, false, true]);
        assert_eq!(out, vec![true; 5]);
        assert_eq!(out, brute_closure(&two, &[true, true, false, false, true]));
    }

    #[test]
    fn parallel_triplets_share_an_upgrade() {
        // (2,3) appears in both directions like an adjacency pair.
        let edges = [(1, 2), (1, 3), (2, 3), (3, 2)];
        assert_eq!(calibrate(&edges, &[true, true, false, false]), vec![true; 4]);
        // Knowing one direction means knowing the pair.
        assert_eq!(calibrate(&edges, &[false, false, true, false]), vec![false, false, true, true]);
    }

    #[test]
    fn p_fraud_zero_means_genuine() {
        let cfg = SimConfig { p_fraud: 0.0, ..Default::default() };
        for s in 0..200 {
            let a = sample_applicant(&pkg(), &cfg, s);
            assert_eq!(a.identity, Decision::NonFraud);
            assert!(a.fake_items.is_empty());
        }
    }

    #[test]
    fn certain_curves_know_everything() {
        let cfg = SimConfig { p_fraud: 1.0, curves: KnowledgeCurves::constant(1.0), ..Default::default() };
        let a = sample_applicant(&pkg(), &cfg, 3);
        assert!(a.knowledge.iter().all(|(_, k)| *k));
        assert_eq!(a.identity, Decision::Fraud);
        assert!((1..=4).contains(&a.fake_items.len()));
    }

    #[test]
    fn school_is_picked_a_third_of_the_time() {
        let cfg = SimConfig { p_fraud: 1.0, fake_count_weights: [1.0, 0.0, 0.0, 0.0], ..Default::default() };
        let p = pkg();
        let n = 10_000;
        let school = (0..n).filter(|&s| sample_applicant(&p, &cfg, s).is_fake(Item::School)).count();
        let f = school as f64 / n as f64;
        assert!((f - 2.0 / 6.0).abs() < 0.02, "{f}");
    }

    #[test]
    fn answers_are_correct_or_abstain() {
        let w = tiny_world();
        let p = pkg();
        let a = sample_applicant(&p, &SimConfig::default(), 11);
        let rendered: Vec<Question> = p.askable.iter().filter_map(|t| render_question(&w, t, 5).ok()).collect();
        assert!(rendered.len() >= 10);
        for q in &rendered {
            let t = &q.triplet;
            let q = q.clone();
            let r = answer(&a, &q).unwrap();
            match r {
                Response::Correct(l) => assert_eq!(l, q.correct_label),
                Response::Abstain => assert_eq!(r.label(), Label::D),
            }
            assert_eq!(r, answer(&a, &q).unwrap());
            assert_eq!(a.knows(t).unwrap(), matches!(r, Response::Correct(_)));
        }
        let foreign = Triplet { head: 99, relation: 0, tail: 98, freq: 1 };
        assert!(a.knows(&foreign).is_err());
    }

    #[test]
    fn governing_items() {
        let p = pkg();
        let school_park = p.askable.iter().find(|t| t.head == 0).unwrap();
        assert_eq!(governing_item(&p, school_park), Governing::Item(Item::School));
        let ctx = &p.context[0];
        assert_eq!(governing_item(&p, ctx), Governing::Context([Item::School].into()));
        // Support from two items: fake only if both are fake.
        let g = Governing::Context([Item::School, Item::Company].into());
        assert!(!governed_by_fake(&g, &[Item::School].into()));
        assert!(!governed_by_fake(&g, &[Item::Company].into()));
        assert!(governed_by_fake(&g, &[Item::School, Item::Company].into()));
        assert!(!governed_by_fake(&g, &BTreeSet::new()));
    }

    #[test]
    fn knowledge_is_deterministic_per_seed() {
        let p = pkg();
        let cfg = SimConfig::default();
        assert_eq!(sample_applicant(&p, &cfg, 77), sample_applicant(&p, &cfg, 77));
    }

    fn random_graph(seed: u64) -> (Vec<(EntityId, EntityId)>, Vec<bool>) {
        let mut r = rng::seeded(seed);
        let m = r.gen_range(1..=8);
        let n = r.gen_range(3..=6u32);
        let mut edges = Vec::new();
        while edges.len() < m {
            let a = r.gen_range(0..n);
            let b = r.gen_range(0..n);
            if a != b {
                edges.push((a, b));
            }
        }
        let known = edges.iter().map(|_| r.gen_bool(0.4)).collect();
        (edges, known)
    }

    #[test]
    fn matches_brute_force_on_small_graphs() {
        for s in 0..1000 {
            let (e, k) = random_graph(s);
            let c = calibrate(&e, &k);
            assert_eq!(c, brute_closure(&e, &k), "case {s}: {e:?} {k:?}");
            assert_eq!(triangles_with_two_known(&e, &c), 0);
            assert_eq!(calibrate(&e, &c), c);
        }
    }

    proptest! {
        #[test]
        fn calibrate_is_order_independent(seed in 0u64..5000, perm_seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let (e, k) = random_graph(seed);
            let c = calibrate(&e, &k);
            let mut idx: Vec<usize> = (0..e.len()).collect();
            idx.shuffle(&mut rng::seeded(perm_seed));
            let e2: Vec<_> = idx.iter().map(|&i| e[i]).collect();
            let k2: Vec<_> = idx.iter().map(|&i| k[i]).collect();
            let c2 = calibrate(&e2, &k2);
            for (j, &i) in idx.iter().enumerate() {
                prop_assert_eq!(c2[j], c[i]);
            }
            for (a, b) in k.iter().zip(&c) {
                prop_assert!(!a || *b);
            }
        }

        #[test]
        fn raising_curves_never_loses_knowledge(seed in 0u64..2000, bump in 0.0f64..0.3, bin in 0usize..8) {
            let p = pkg();
            let lo = SimConfig::default();
            let mut hi = lo.clone();
            hi.curves.genuine[bin] = (hi.curves.genuine[bin] + bump).min(1.0);
            hi.curves.fake[bin] = (hi.curves.fake[bin] + bump).min(1.0);
            let a = sample_applicant(&p, &lo, seed);
            let b = sample_applicant(&p, &hi, seed);
            for ((_, x), (_, y)) in a.knowledge.iter().zip(&b.knowledge) {
                prop_assert!(!x || *y);
            }
        }
    }
}
