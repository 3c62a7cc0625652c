//! Rule grounding against the triple store.
//!
//! Body enumeration is an index-backed nested join. Head groundings are
//! kept compact: when a head variable never occurs in the body, the
//! instantiation set is a cartesian product with the whole entity set and
//! is represented symbolically instead of materialized.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Atom, Rule, Term, MAX_VARS};
use crate::embedding::{truth, EmbeddingState};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple};

type Binding = [Option<EntityId>; MAX_VARS];

#[inline]
fn resolve(t: Term, b: &Binding) -> Option<EntityId> {
    match t {
        Term::Const(e) => Some(e),
        Term::Var(v) => b[v as usize],
    }
}

/// Calls `visit` once per distinct assignment of body variables that
/// grounds every atom in `kg`. Atoms are joined most-constrained first.
fn enumerate_bodies(kg: &KnowledgeGraph, body: &[Atom], visit: &mut dyn FnMut(&Binding)) {
    let mut order: Vec<usize> = (0..body.len()).collect();
    // Constants first, then smaller relations; cheap static join order.
    order.sort_by_key(|&i| {
        let a = &body[i];
        let consts = a.terms().iter().filter(|t| t.var().is_none()).count();
        (std::cmp::Reverse(consts), kg.relation_size(a.relation), i)
    });
    let mut binding: Binding = [None; MAX_VARS];
    recurse(kg, body, &order, 0, &mut binding, visit);
}

fn recurse(
    kg: &KnowledgeGraph,
    body: &[Atom],
    order: &[usize],
    depth: usize,
    binding: &mut Binding,
    visit: &mut dyn FnMut(&Binding),
) {
    if depth == order.len() {
        visit(binding);
        return;
    }
    let atom = &body[order[depth]];
    let r = atom.relation;
    match (resolve(atom.subject, binding), resolve(atom.object, binding)) {
        (Some(s), Some(o)) => {
            if kg.contains(Triple::new(s, r, o)) {
                recurse(kg, body, order, depth + 1, binding, visit);
            }
        }
        (Some(s), None) => {
            let v = atom.object.var().expect("unresolved term is a variable") as usize;
            for &t in kg.tails(r, s) {
                binding[v] = Some(t);
                recurse(kg, body, order, depth + 1, binding, visit);
            }
            binding[v] = None;
        }
        (None, Some(o)) => {
            let v = atom.subject.var().expect("unresolved term is a variable") as usize;
            for &h in kg.heads(r, o) {
                binding[v] = Some(h);
                recurse(kg, body, order, depth + 1, binding, visit);
            }
            binding[v] = None;
        }
        (None, None) => {
            let sv = atom.subject.var().expect("unresolved term is a variable") as usize;
            let ov = atom.object.var().expect("unresolved term is a variable") as usize;
            if sv == ov {
                // Reflexive pattern: only diagonal pairs ground it.
                for &(h, t) in kg.pairs(r) {
                    if h == t {
                        binding[sv] = Some(h);
                        recurse(kg, body, order, depth + 1, binding, visit);
                    }
                }
                binding[sv] = None;
            } else {
                for &(h, t) in kg.pairs(r) {
                    binding[sv] = Some(h);
                    binding[ov] = Some(t);
                    recurse(kg, body, order, depth + 1, binding, visit);
                }
                binding[sv] = None;
                binding[ov] = None;
            }
        }
    }
}

/// The instantiation set of a rule's head, S. `Exact` lists the (subject,
/// object) pairs; the `Free*` forms stand for `values x entity-set` when
/// one head variable is unconstrained by the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeadGroundings {
    Exact(Vec<(EntityId, EntityId)>),
    /// Head object variable free: S = subjects x all entities.
    FreeObject { subjects: Vec<EntityId> },
    /// Head subject variable free: S = all entities x objects.
    FreeSubject { objects: Vec<EntityId> },
    /// Empty body: every instantiation is trivially supported.
    Unconstrained,
}

pub fn head_groundings(kg: &KnowledgeGraph, rule: &Rule) -> Result<HeadGroundings> {
    if rule.body().is_empty() {
        return Ok(HeadGroundings::Unconstrained);
    }
    let free = rule.free_head_vars();
    let head = rule.head();
    let subject_free = matches!(head.subject, Term::Var(v) if free.contains(&v));
    let object_free = matches!(head.object, Term::Var(v) if free.contains(&v));
    if subject_free && object_free {
        return Err(Error::Grounding(format!(
            "head of `{rule}` shares no variable with its body"
        )));
    }

    if !subject_free && !object_free {
        let mut pairs = HashSet::new();
        enumerate_bodies(kg, rule.body(), &mut |b| {
            let s = resolve(head.subject, b).expect("head subject bound");
            let o = resolve(head.object, b).expect("head object bound");
            pairs.insert((s, o));
        });
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.sort_unstable();
        Ok(HeadGroundings::Exact(pairs))
    } else if object_free {
        let mut subjects = HashSet::new();
        enumerate_bodies(kg, rule.body(), &mut |b| {
            subjects.insert(resolve(head.subject, b).expect("head subject bound"));
        });
        let mut subjects: Vec<_> = subjects.into_iter().collect();
        subjects.sort_unstable();
        Ok(HeadGroundings::FreeObject { subjects })
    } else {
        let mut objects = HashSet::new();
        enumerate_bodies(kg, rule.body(), &mut |b| {
            objects.insert(resolve(head.object, b).expect("head object bound"));
        });
        let mut objects: Vec<_> = objects.into_iter().collect();
        objects.sort_unstable();
        Ok(HeadGroundings::FreeSubject { objects })
    }
}

impl HeadGroundings {
    /// |S|: the number of distinct head instantiations.
    pub fn count(&self, kg: &KnowledgeGraph) -> usize {
        match self {
            HeadGroundings::Exact(pairs) => pairs.len(),
            HeadGroundings::FreeObject { subjects } => subjects.len() * kg.n_entities(),
            HeadGroundings::FreeSubject { objects } => objects.len() * kg.n_entities(),
            HeadGroundings::Unconstrained => kg.n_entities() * kg.n_entities(),
        }
    }

    /// |S intersect kg| for the given head relation.
    pub fn observed(&self, kg: &KnowledgeGraph, rule: &Rule) -> usize {
        let r = rule.head().relation;
        match self {
            HeadGroundings::Exact(pairs) => pairs
                .iter()
                .filter(|&&(s, o)| kg.contains(Triple::new(s, r, o)))
                .count(),
            HeadGroundings::FreeObject { subjects } => {
                subjects.iter().map(|&s| kg.tails(r, s).len()).sum()
            }
            HeadGroundings::FreeSubject { objects } => {
                objects.iter().map(|&o| kg.heads(r, o).len()).sum()
            }
            HeadGroundings::Unconstrained => kg.relation_size(r),
        }
    }
}

/// Number of distinct body-satisfiable head instantiations, |S|.
pub fn body_groundings(kg: &KnowledgeGraph, rule: &Rule) -> Result<usize> {
    Ok(head_groundings(kg, rule)?.count(kg))
}

/// Number of head instantiations observed in the graph, |S intersect G|.
pub fn support(kg: &KnowledgeGraph, rule: &Rule) -> Result<usize> {
    Ok(head_groundings(kg, rule)?.observed(kg, rule))
}

/// Materializes S for a closed, connected rule, ascending and distinct.
pub fn infer_heads(kg: &KnowledgeGraph, rule: &Rule) -> Result<Vec<Triple>> {
    if rule.body().is_empty() {
        return Err(Error::Grounding(format!("`{rule}` has no body to ground")));
    }
    if !rule.is_closed() {
        return Err(Error::Grounding(format!("`{rule}` is not closed")));
    }
    if !rule.is_connected() {
        return Err(Error::Grounding(format!("`{rule}` is not connected")));
    }
    match head_groundings(kg, rule)? {
        HeadGroundings::Exact(pairs) => {
            let r = rule.head().relation;
            Ok(pairs.into_iter().map(|(s, o)| Triple::new(s, r, o)).collect())
        }
        _ => Err(Error::Grounding(format!(
            "`{rule}` leaves a head variable unbound"
        ))),
    }
}

const EC_REJECTION_RETRIES: usize = 10_000;

/// Mean truth value over the rule's unobserved predictions, estimated on a
/// seeded sample of `cap` when the prediction set is larger. Returns None
/// when every prediction is already in the graph.
pub fn embedding_confidence(
    kg: &KnowledgeGraph,
    rule: &Rule,
    state: &EmbeddingState,
    cap: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let hg = head_groundings(kg, rule)?;
    let r = rule.head().relation;
    let unobserved = hg.count(kg) - hg.observed(kg, rule);
    if unobserved == 0 {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    match &hg {
        HeadGroundings::Exact(pairs) => {
            let novel: Vec<Triple> = pairs
                .iter()
                .map(|&(s, o)| Triple::new(s, r, o))
                .filter(|t| !kg.contains(*t))
                .collect();
            let mean = if novel.len() <= cap {
                mean_truth(state, novel.iter().copied())
            } else {
                let idx = rand::seq::index::sample(&mut rng, novel.len(), cap);
                mean_truth(state, idx.iter().map(|i| novel[i]))
            };
            Ok(Some(mean))
        }
        HeadGroundings::FreeObject { subjects } | HeadGroundings::FreeSubject { objects: subjects } => {
            let object_free = matches!(&hg, HeadGroundings::FreeObject { .. });
            let make = |bound: EntityId, free: EntityId| {
                if object_free {
                    Triple::new(bound, r, free)
                } else {
                    Triple::new(free, r, bound)
                }
            };
            if unobserved <= cap {
                // Small enough to walk the whole product.
                let mut acc = 0.0;
                for &b in subjects {
                    for e in 0..kg.n_entities() as u32 {
                        let t = make(b, EntityId(e));
                        if !kg.contains(t) {
                            acc += truth(state, t);
                        }
                    }
                }
                Ok(Some(acc / unobserved as f64))
            } else {
                // Rejection sampling from the product minus the graph; the
                // observed part is a vanishing fraction of the product here.
                let mut acc = 0.0;
                for _ in 0..cap {
                    let mut tries = 0;
                    loop {
                        let b = subjects[rng.gen_range(0..subjects.len())];
                        let e = EntityId(rng.gen_range(0..kg.n_entities() as u32));
                        let t = make(b, e);
                        if !kg.contains(t) {
                            acc += truth(state, t);
                            break;
                        }
                        tries += 1;
                        if tries >= EC_REJECTION_RETRIES {
                            return Err(Error::Sampling(format!(
                                "could not draw an unobserved prediction of `{rule}`"
                            )));
                        }
                    }
                }
                Ok(Some(acc / cap as f64))
            }
        }
        HeadGroundings::Unconstrained => Ok(None),
    }
}

fn mean_truth(state: &EmbeddingState, triples: impl IntoIterator<Item = Triple>) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for t in triples {
        acc += truth(state, t);
        n += 1;
    }
    acc / n as f64
}
