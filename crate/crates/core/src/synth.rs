//! Synthetic graphs with known regularities.
//!
//! `planted` builds the graph the demo data and integration tests use.
//! Three rule systems hold by construction: a two-hop composition
//! chain, a symmetric relation, and an inverse pair. Each system has a
//! structural twin over disjoint entity blocks whose consequences are
//! held out more aggressively, so the primary rules keep a confidence
//! margin over their twins on any split while the twins pad the
//! high-quality end of the mined rule list with sound rules.
//!
//! Every fact is either base (never held out) or the consequence of a
//! planted rule; valid and test are drawn from consequences alone, so
//! each held-out triple is recoverable from the train split by the rule
//! that implies it. Targets are dealt from reshuffled cycles, keeping
//! relation columns nearly uniform: no entity is frequent enough in any
//! column to be picked up as a constant during rule refinement, and the
//! one-out/bijective wiring leaves no room for accidental
//! high-confidence patterns between unrelated relations.

use std::collections::HashSet;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{Dictionary, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::rules::{Atom, Rule, Term};

pub const PLANTED_ENTITIES: usize = 200;
pub const PLANTED_RELATIONS: usize = 13;

/// Twin consequences are held out this much deeper than the primary
/// ones (capped), which separates the twins' confidence downward.
const TWIN_TEST_FACTOR: f64 = 4.0;
const TWIN_TEST_CAP: f64 = 0.6;

const X1: Range<u32> = 0..50;
const Z1: Range<u32> = 50..80;
const Y1: Range<u32> = 80..110;
const X2: Range<u32> = 110..130;
const Z2: Range<u32> = 130..145;
const Y2: Range<u32> = 145..160;
const A1: Range<u32> = 160..170;
const B1: Range<u32> = 170..180;
const A2: Range<u32> = 180..190;
const B2: Range<u32> = 190..200;

const REL_NAMES: [&str; PLANTED_RELATIONS] =
    ["p", "q", "s", "m", "u", "v", "p2", "q2", "s2", "m2", "u2", "v2", "w"];
const P: u32 = 0;
const Q: u32 = 1;
const S: u32 = 2;
const M: u32 = 3;
const U: u32 = 4;
const V: u32 = 5;
const P2: u32 = 6;
const Q2: u32 = 7;
const S2: u32 = 8;
const M2: u32 = 9;
const U2: u32 = 10;
const V2: u32 = 11;
const W: u32 = 12;

#[derive(Debug)]
pub struct Planted {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub entities: Dictionary,
    pub relations: Dictionary,
    /// The primary regularities, in canonical form.
    pub rules: Vec<Rule>,
}

impl Planted {
    pub fn train_graph(&self) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(
            self.train.iter().copied(),
            PLANTED_ENTITIES,
            PLANTED_RELATIONS,
        )
        .0
    }

    pub fn valid_graph(&self) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(
            self.valid.iter().copied(),
            PLANTED_ENTITIES,
            PLANTED_RELATIONS,
        )
        .0
    }

    pub fn test_graph(&self) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(
            self.test.iter().copied(),
            PLANTED_ENTITIES,
            PLANTED_RELATIONS,
        )
        .0
    }
}

fn tr(h: u32, r: u32, t: u32) -> Triple {
    Triple::new(EntityId(h), RelationId(r), EntityId(t))
}

/// Deals values from reshuffled cycles of a block; per-value draw
/// counts never differ by more than one within a cycle.
struct Dealer {
    pool: Vec<u32>,
    at: usize,
}

impl Dealer {
    fn new(block: Range<u32>, rng: &mut ChaCha8Rng) -> Self {
        let mut pool: Vec<u32> = block.collect();
        pool.shuffle(rng);
        Dealer { pool, at: 0 }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> u32 {
        if self.at == self.pool.len() {
            self.pool.shuffle(rng);
            self.at = 0;
        }
        let v = self.pool[self.at];
        self.at += 1;
        v
    }
}

struct System {
    base: Vec<Triple>,
    implied: Vec<Triple>,
}

/// Composition system: every x has exactly one p-edge, q is a bijection
/// from middles to targets, s is the exact two-hop composition. One-out
/// wiring makes the reverse reconstruction rules exact as well, so
/// nothing mined from this block predicts a false fact.
fn chain(
    rng: &mut ChaCha8Rng,
    xs: Range<u32>,
    zs: Range<u32>,
    ys: Range<u32>,
    p: u32,
    q: u32,
    s: u32,
) -> System {
    assert_eq!(zs.len(), ys.len());
    let mut z_deal = Dealer::new(zs.clone(), rng);
    let mut ys_pool: Vec<u32> = ys.collect();
    ys_pool.shuffle(rng);
    let y_of = |z: u32| ys_pool[(z - zs.start) as usize];

    let mut base = Vec::new();
    let mut implied = Vec::new();
    for z in zs.clone() {
        base.push(tr(z, q, y_of(z)));
    }
    for x in xs {
        let z = z_deal.next(rng);
        base.push(tr(x, p, z));
        implied.push(tr(x, s, y_of(z)));
    }
    System { base, implied }
}

/// Symmetric relation over disjoint pairs covering the block; forward
/// edges are base facts, reverses are consequences. Degree one means a
/// pair carries no length-three specialization of the symmetry rule.
fn symmetric(rng: &mut ChaCha8Rng, block: Range<u32>, rel: u32) -> System {
    let mut members: Vec<u32> = block.collect();
    members.shuffle(rng);
    let mut base = Vec::new();
    let mut implied = Vec::new();
    for pair in members.chunks(2) {
        base.push(tr(pair[0], rel, pair[1]));
        implied.push(tr(pair[1], rel, pair[0]));
    }
    System { base, implied }
}

/// Inverse pair: u is a random bijection between the blocks, v its
/// exact inverse. u edges are base facts, v edges consequences.
fn inverse(rng: &mut ChaCha8Rng, a: Range<u32>, b: Range<u32>, u: u32, v: u32) -> System {
    assert_eq!(a.len(), b.len());
    let mut left: Vec<u32> = a.collect();
    let mut right: Vec<u32> = b.collect();
    left.shuffle(rng);
    right.shuffle(rng);
    let mut base = Vec::new();
    let mut implied = Vec::new();
    for (&x, &y) in left.iter().zip(&right) {
        base.push(tr(x, u, y));
        implied.push(tr(y, v, x));
    }
    System { base, implied }
}

/// Unexplained noise between two blocks, column-balanced like
/// everything else.
fn noise(rng: &mut ChaCha8Rng, from: Range<u32>, to: Range<u32>, n: usize, rel: u32) -> Vec<Triple> {
    let mut from_deal = Dealer::new(from, rng);
    let mut to_deal = Dealer::new(to, rng);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let t = tr(from_deal.next(rng), rel, to_deal.next(rng));
        if seen.insert(t) {
            out.push(t);
        }
    }
    out
}

/// Generates the planted graph and splits it. `holdout` gives the
/// (valid, test) fractions of the primary rule consequences; twin
/// consequences use the same valid fraction and a deeper test fraction.
/// Fractions must be nonnegative and sum to at most 0.4.
pub fn planted(seed: u64, holdout: (f64, f64)) -> Result<Planted> {
    let (f_valid, f_test) = holdout;
    if f_valid < 0.0 || f_test < 0.0 {
        return Err(Error::Config("holdout fractions must be nonnegative".into()));
    }
    if f_valid + f_test > 0.4 {
        return Err(Error::Config(format!(
            "holdout fractions must sum to at most 0.4, got {}",
            f_valid + f_test
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let systems_primary = [
        chain(&mut rng, X1, Z1, Y1, P, Q, S),
        symmetric(&mut rng, X1, M),
        inverse(&mut rng, A1, B1, U, V),
    ];
    let systems_twin = [
        chain(&mut rng, X2, Z2, Y2, P2, Q2, S2),
        symmetric(&mut rng, Y1, M2),
        inverse(&mut rng, A2, B2, U2, V2),
    ];
    let noise = noise(&mut rng, Y2, X2, 15, W);

    let mut train: Vec<Triple> = noise;
    let mut valid = Vec::new();
    let mut test = Vec::new();

    let twin_test = (TWIN_TEST_FACTOR * f_test).min(TWIN_TEST_CAP);
    let mut split = |systems: [System; 3], f_t: f64| {
        for sys in systems {
            train.extend(sys.base);
            let mut implied = sys.implied;
            implied.sort_unstable();
            implied.shuffle(&mut rng);
            let n_test = (f_t * implied.len() as f64).round() as usize;
            let n_valid = (f_valid * implied.len() as f64).round() as usize;
            test.extend(implied.drain(..n_test));
            valid.extend(implied.drain(..n_valid));
            train.extend(implied);
        }
    };
    split(systems_primary, f_test);
    split(systems_twin, twin_test);

    train.sort_unstable();
    train.shuffle(&mut rng);
    valid.sort_unstable();
    valid.shuffle(&mut rng);
    test.sort_unstable();
    test.shuffle(&mut rng);

    let mut entities = Dictionary::new();
    for e in 0..PLANTED_ENTITIES {
        entities.intern(&format!("e{e:03}"));
    }
    let mut relations = Dictionary::new();
    for name in REL_NAMES {
        relations.intern(name);
    }

    let a = Term::Var(0);
    let b = Term::Var(1);
    let c = Term::Var(2);
    let rules = vec![
        Rule::new(
            Atom::new(RelationId(S), a, b),
            vec![Atom::new(RelationId(P), a, c), Atom::new(RelationId(Q), c, b)],
        ),
        Rule::new(
            Atom::new(RelationId(M), a, b),
            vec![Atom::new(RelationId(M), b, a)],
        ),
        Rule::new(
            Atom::new(RelationId(V), a, b),
            vec![Atom::new(RelationId(U), b, a)],
        ),
    ];

    Ok(Planted { train, valid, test, entities, relations, rules })
}

/// Uniform random graph without duplicates, for oracle comparisons.
pub fn random_kg(
    rng: &mut impl rand::Rng,
    n_entities: usize,
    n_relations: usize,
    n_triples: usize,
) -> KnowledgeGraph {
    assert!(n_triples <= n_entities * n_relations * n_entities);
    let mut set = HashSet::with_capacity(n_triples);
    while set.len() < n_triples {
        set.insert(tr(
            rng.gen_range(0..n_entities as u32),
            rng.gen_range(0..n_relations as u32),
            rng.gen_range(0..n_entities as u32),
        ));
    }
    let mut triples: Vec<Triple> = set.into_iter().collect();
    triples.sort_unstable();
    KnowledgeGraph::from_triples(triples, n_entities, n_relations).0
}

/// One symmetric relation over 64 entities: 190 mutual pairs and 20
/// one-directional, so the symmetry rule's confidence is exactly
/// 380/400 = 0.95 with head coverage 1.0.
pub fn symmetric_fixture(seed: u64) -> (KnowledgeGraph, Rule) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    while pairs.len() < 210 {
        let a = rng.gen_range(0..64u32);
        let b = rng.gen_range(0..64u32);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            pairs.push((a, b));
        }
    }
    let mut triples = Vec::new();
    for (i, &(a, b)) in pairs.iter().enumerate() {
        triples.push(tr(a, 0, b));
        if i < 190 {
            triples.push(tr(b, 0, a));
        }
    }
    let rule = Rule::new(
        Atom::new(RelationId(0), Term::Var(0), Term::Var(1)),
        vec![Atom::new(RelationId(0), Term::Var(1), Term::Var(0))],
    );
    (KnowledgeGraph::from_triples(triples, 64, 1).0, rule)
}
