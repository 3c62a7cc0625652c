//! The join-based grounding engine against the exhaustive oracle, over
//! random graphs and the rule shapes the miner can produce.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle_ground, tr};
use hornbeam::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use hornbeam::rules::{body_groundings, infer_heads, support, Atom, Rule, Term};
use hornbeam::synth::random_kg;

fn v(i: u8) -> Term {
    Term::Var(i)
}

fn atom(r: u32, s: Term, o: Term) -> Atom {
    Atom::new(RelationId(r), s, o)
}

/// Shapes covering every join case: inversion, composition, symmetry,
/// convergence, a free head variable, constants, and a doubled variable.
fn shapes(c: EntityId) -> Vec<Rule> {
    vec![
        Rule::new(atom(0, v(0), v(1)), vec![atom(1, v(1), v(0))]),
        Rule::new(atom(0, v(0), v(1)), vec![atom(1, v(0), v(2)), atom(2, v(2), v(1))]),
        Rule::new(atom(0, v(0), v(1)), vec![atom(0, v(1), v(0))]),
        Rule::new(atom(0, v(0), v(1)), vec![atom(1, v(0), v(2)), atom(1, v(1), v(2))]),
        Rule::new(atom(0, v(0), v(1)), vec![atom(1, v(0), v(2))]),
        Rule::new(atom(0, v(0), v(1)), vec![atom(1, v(0), Term::Const(c)), atom(1, Term::Const(c), v(1))]),
        Rule::new(atom(0, v(0), v(1)), vec![atom(1, v(0), v(0)), atom(2, v(0), v(1))]),
    ]
}

#[test]
fn engine_matches_oracle_on_random_graphs() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_entities = 12 + (seed as usize % 3) * 6;
        let n_triples = 60 + (seed as usize) * 12;
        let kg = random_kg(&mut rng, n_entities, 3, n_triples);

        for rule in shapes(EntityId(seed as u32 % n_entities as u32)) {
            let oracle = oracle_ground(&kg, &rule);
            assert_eq!(
                body_groundings(&kg, &rule).unwrap(),
                oracle.body_groundings,
                "body groundings diverge for {rule} on seed {seed}"
            );
            assert_eq!(
                support(&kg, &rule).unwrap(),
                oracle.support,
                "support diverges for {rule} on seed {seed}"
            );
            if rule.is_closed() {
                let engine: BTreeSet<Triple> =
                    infer_heads(&kg, &rule).unwrap().into_iter().collect();
                assert_eq!(engine, oracle.s_tau, "inferred heads diverge for {rule}");
            }
        }
    }
}

#[test]
fn ground_rule_has_one_instantiation() {
    let kg = KnowledgeGraph::from_triples([tr(0, 0, 1), tr(1, 1, 0)], 4, 2).0;
    let rule = Rule::new(
        atom(0, Term::Const(EntityId(0)), Term::Const(EntityId(1))),
        vec![atom(1, Term::Const(EntityId(1)), Term::Const(EntityId(0)))],
    );
    let oracle = oracle_ground(&kg, &rule);
    assert_eq!(oracle.body_groundings, 1);
    assert_eq!(oracle.support, 1);
    assert_eq!(body_groundings(&kg, &rule).unwrap(), 1);
    assert_eq!(support(&kg, &rule).unwrap(), 1);
}

prop_compose! {
    fn arb_triples()(raw in prop::collection::vec((0..15u32, 0..3u32, 0..15u32), 1..120)) -> Vec<Triple> {
        raw.into_iter().map(|(h, r, t)| tr(h, r, t)).collect()
    }
}

prop_compose! {
    fn arb_term()(is_var in any::<bool>(), var in 0..4u8, konst in 0..15u32) -> Term {
        if is_var { Term::Var(var) } else { Term::Const(EntityId(konst)) }
    }
}

prop_compose! {
    fn arb_atom()(r in 0..3u32, s in arb_term(), o in arb_term()) -> Atom {
        Atom::new(RelationId(r), s, o)
    }
}

proptest! {
    /// Insertion order never changes what the graph contains or how rules
    /// ground against it.
    #[test]
    fn index_is_insertion_order_invariant(triples in arb_triples(), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = triples.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));

        let (a, dup_a) = KnowledgeGraph::from_triples(triples, 15, 3);
        let (b, dup_b) = KnowledgeGraph::from_triples(shuffled, 15, 3);

        prop_assert_eq!(dup_a, dup_b);
        prop_assert_eq!(a.len(), b.len());
        let mut ta: Vec<Triple> = a.triples().to_vec();
        let mut tb: Vec<Triple> = b.triples().to_vec();
        ta.sort_unstable();
        tb.sort_unstable();
        prop_assert_eq!(&ta, &tb);
        for r in 0..3u32 {
            prop_assert_eq!(a.pairs(RelationId(r)), b.pairs(RelationId(r)));
        }
        for e in 0..15u32 {
            for r in 0..3u32 {
                prop_assert_eq!(
                    a.tails(RelationId(r), EntityId(e)),
                    b.tails(RelationId(r), EntityId(e))
                );
                prop_assert_eq!(
                    a.heads(RelationId(r), EntityId(e)),
                    b.heads(RelationId(r), EntityId(e))
                );
            }
        }
        let rule = Rule::new(atom(0, v(0), v(1)), vec![atom(1, v(1), v(0))]);
        prop_assert_eq!(
            support(&a, &rule).unwrap(),
            support(&b, &rule).unwrap()
        );
    }

    /// Renaming variables and permuting the body never changes a rule's
    /// canonical encoding.
    #[test]
    fn canonical_form_is_alpha_invariant(
        head in arb_atom(),
        body in prop::collection::vec(arb_atom(), 0..3),
        offset in 1..3u8,
        flip in any::<bool>(),
    ) {
        // Adding a constant mod 6 permutes the variable space.
        let rename = |a: &Atom| {
            let m = |t: Term| match t {
                Term::Var(x) => Term::Var((x + offset) % 6),
                c => c,
            };
            Atom::new(a.relation, m(a.subject), m(a.object))
        };
        let original = Rule::new(head, body.clone());

        let mut permuted = body.clone();
        if flip {
            permuted.reverse();
        }
        let renamed = Rule::new(rename(&head), permuted.iter().map(rename).collect());
        prop_assert_eq!(original.encoding(), renamed.encoding());
        prop_assert_eq!(original, renamed);
    }
}
