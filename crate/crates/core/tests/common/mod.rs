//! Brute-force reference implementations the integration tests compare
//! against: exhaustive rule grounding, finite-difference gradients, and
//! sorted-list ranking.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

use hornbeam::embedding::{score, EmbeddingState};
use hornbeam::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use hornbeam::rules::{Rule, Term};

pub fn tr(h: u32, r: u32, t: u32) -> Triple {
    Triple::new(EntityId(h), RelationId(r), EntityId(t))
}

#[derive(Debug, PartialEq, Eq)]
pub struct OracleGrounding {
    /// Distinct head instantiations whose body holds, as full triples.
    pub s_tau: BTreeSet<Triple>,
    /// The confidence denominator: |S|, distinct head-variable pairs with
    /// a satisfiable body (free head variables range over all entities).
    pub body_groundings: usize,
    pub support: usize,
}

/// Enumerates every total assignment of the rule's variables over the
/// entity set and records the distinct head instantiations whose body
/// atoms all hold. No indexes, no joins: the definition, literally.
pub fn oracle_ground(kg: &KnowledgeGraph, rule: &Rule) -> OracleGrounding {
    let mut vars = BTreeSet::new();
    for atom in rule.atoms() {
        for t in atom.terms() {
            if let Some(v) = t.var() {
                vars.insert(v);
            }
        }
    }
    let vars: Vec<u8> = vars.into_iter().collect();
    let n = kg.n_entities() as u32;

    let resolve = |t: Term, assign: &[u32]| -> EntityId {
        match t {
            Term::Const(e) => e,
            Term::Var(v) => {
                let slot = vars.iter().position(|&x| x == v).expect("var collected");
                EntityId(assign[slot])
            }
        }
    };

    let mut s_tau = BTreeSet::new();
    let mut assign = vec![0u32; vars.len()];
    'outer: loop {
        let body_holds = rule.body().iter().all(|a| {
            kg.contains(Triple::new(
                resolve(a.subject, &assign),
                a.relation,
                resolve(a.object, &assign),
            ))
        });
        if body_holds {
            let h = rule.head();
            s_tau.insert(Triple::new(
                resolve(h.subject, &assign),
                h.relation,
                resolve(h.object, &assign),
            ));
        }
        // Odometer step.
        for slot in (0..assign.len()).rev() {
            assign[slot] += 1;
            if assign[slot] < n {
                continue 'outer;
            }
            assign[slot] = 0;
        }
        break;
    }

    let support = s_tau.iter().filter(|t| kg.contains(**t)).count();
    OracleGrounding { body_groundings: s_tau.len(), support, s_tau }
}

/// Central finite difference of the score in every coordinate of the
/// three rows a triple touches. Returns (d_head, d_rel, d_tail).
pub fn fd_score_grad(
    state: &EmbeddingState,
    t: Triple,
    step: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let entity_row = |which: EntityId| -> usize { which.index() };
    let probe = |entities: bool, row: usize, col: usize| -> f64 {
        let mut plus = state.clone();
        let mut minus = state.clone();
        if entities {
            plus.entities.row_mut(row)[col] += step;
            minus.entities.row_mut(row)[col] -= step;
        } else {
            plus.relations.row_mut(row)[col] += step;
            minus.relations.row_mut(row)[col] -= step;
        }
        (score(&plus, t) - score(&minus, t)) / (2.0 * step)
    };

    let ew = state.model.entity_width();
    let rw = state.model.relation_width();
    let d_head: Vec<f64> = (0..ew).map(|c| probe(true, entity_row(t.head), c)).collect();
    let d_rel: Vec<f64> = (0..rw).map(|c| probe(false, t.relation.index(), c)).collect();
    let d_tail: Vec<f64> = (0..ew).map(|c| probe(true, entity_row(t.tail), c)).collect();
    (d_head, d_rel, d_tail)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Sorted-list filtered rank: scores every candidate side entity, drops
/// other known-true candidates, orders by score descending with a random
/// permutation breaking ties, and reports the target's 1-based position.
pub fn oracle_rank_side(
    state: &EmbeddingState,
    t: Triple,
    corrupt_head: bool,
    filter: &std::collections::HashSet<Triple>,
    n_entities: usize,
    rng: &mut impl Rng,
) -> u32 {
    let target = if corrupt_head { t.head } else { t.tail };
    let mut rows: Vec<(f64, f64, EntityId)> = Vec::with_capacity(n_entities);
    for e in 0..n_entities as u32 {
        let e = EntityId(e);
        let candidate = if corrupt_head {
            Triple::new(e, t.relation, t.tail)
        } else {
            Triple::new(t.head, t.relation, e)
        };
        if e != target && filter.contains(&candidate) {
            continue;
        }
        rows.push((score(state, candidate), rng.gen::<f64>(), e));
    }
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    rows.iter().position(|&(_, _, e)| e == target).expect("target is a candidate") as u32 + 1
}
