//! Refinement operators for the rule search.
//!
//! Three ways to extend a rule with one body atom:
//!   dangling      one fresh variable, one term already in the rule
//!   instantiated  one term already in the rule, one constant entity
//!   closing       both arguments already in the rule
//!
//! Constants are drawn per column: an entity qualifies as a subject
//! (object) constant of r only if it appears at least `min_const_freq`
//! times as the subject (object) of r. Graph-wide frequency is the wrong
//! test here; an entity can be busy overall yet occur once in the column
//! being instantiated, and such constants yield near-empty cartesian
//! bodies that are fully observed by accident and score a vacuous
//! confidence of 1. Reflexive atoms (same variable twice) and ground
//! atoms (two constants) are never proposed, and a candidate equal to
//! the head or an existing body atom is skipped.

use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Rule, Term, MAX_VARS};
use crate::kg::{EntityId, KnowledgeGraph, RelationId};

/// Per-mine precomputation shared by every refine call.
pub struct RefineContext {
    relations: Vec<RelationId>,
    /// Frequent constants seen as subject of r, ascending.
    subject_consts: Vec<Vec<EntityId>>,
    /// Frequent constants seen as object of r, ascending.
    object_consts: Vec<Vec<EntityId>>,
    max_len: usize,
}

impl RefineContext {
    pub fn new(kg: &KnowledgeGraph, min_const_freq: u32, max_len: usize) -> Self {
        let mut relations = Vec::new();
        let mut subject_consts = Vec::new();
        let mut object_consts = Vec::new();
        for r in 0..kg.n_relations() as u32 {
            let r = RelationId(r);
            if kg.relation_size(r) > 0 {
                relations.push(r);
            }
            let mut subs: BTreeMap<EntityId, u32> = BTreeMap::new();
            let mut objs: BTreeMap<EntityId, u32> = BTreeMap::new();
            for &(h, t) in kg.pairs(r) {
                *subs.entry(h).or_insert(0) += 1;
                *objs.entry(t).or_insert(0) += 1;
            }
            let frequent = |m: BTreeMap<EntityId, u32>| {
                m.into_iter()
                    .filter(|&(_, c)| c >= min_const_freq)
                    .map(|(e, _)| e)
                    .collect::<Vec<_>>()
            };
            subject_consts.push(frequent(subs));
            object_consts.push(frequent(objs));
        }
        RefineContext { relations, subject_consts, object_consts, max_len }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }
}

/// All one-atom extensions of `rule`, canonicalized and deduplicated.
/// A rule already at maximum length has no extensions.
pub fn refine(rule: &Rule, ctx: &RefineContext) -> Vec<Rule> {
    if rule.len() >= ctx.max_len {
        return Vec::new();
    }
    let shared: Vec<Term> = shared_terms(rule);
    let fresh = rule.n_vars() as u8;
    let mut out = Vec::new();
    let mut push = |candidate: Atom| {
        if candidate == rule.head() || rule.body().contains(&candidate) {
            return;
        }
        let mut body = rule.body().to_vec();
        body.push(candidate);
        out.push(Rule::new(rule.head(), body));
    };

    for &r in &ctx.relations {
        // Dangling: fresh variable against each shared term, both sides.
        if (fresh as usize) < MAX_VARS {
            for &s in &shared {
                push(Atom::new(r, s, Term::Var(fresh)));
                push(Atom::new(r, Term::Var(fresh), s));
            }
        }

        // Instantiated: shared variable against a frequent constant.
        // Ground atoms (shared constant + constant) are not useful search
        // states, so the shared side is restricted to variables.
        for &s in &shared {
            if s.var().is_none() {
                continue;
            }
            for &c in &ctx.object_consts[r.index()] {
                push(Atom::new(r, s, Term::Const(c)));
            }
            for &c in &ctx.subject_consts[r.index()] {
                push(Atom::new(r, Term::Const(c), s));
            }
        }

        // Closing: two distinct shared terms, skipping const/const.
        for &a in &shared {
            for &b in &shared {
                if a == b || (a.var().is_none() && b.var().is_none()) {
                    continue;
                }
                push(Atom::new(r, a, b));
            }
        }
    }

    // Canonicalization can collapse syntactically different extensions.
    out.sort_by(|x, y| x.encoding().cmp(&y.encoding()));
    out.dedup();
    out
}

/// Terms usable as join points, in deterministic order: variables
/// ascending, then constants ascending.
fn shared_terms(rule: &Rule) -> Vec<Term> {
    let mut vars = BTreeSet::new();
    let mut consts = BTreeSet::new();
    for atom in rule.atoms() {
        for t in atom.terms() {
            match t {
                Term::Var(v) => {
                    vars.insert(v);
                }
                Term::Const(e) => {
                    consts.insert(e);
                }
            }
        }
    }
    vars.into_iter()
        .map(Term::Var)
        .chain(consts.into_iter().map(Term::Const))
        .collect()
}
