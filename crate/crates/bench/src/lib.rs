//! Shared fixtures for the benchmark targets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hornbeam::embedding::{EmbeddingState, ModelKind, ScoreModel};
use hornbeam::synth::{planted, random_kg, PLANTED_ENTITIES, PLANTED_RELATIONS};
use hornbeam::{KnowledgeGraph, Triple};

/// The structured graph the miner benchmarks run on.
pub fn planted_graph() -> KnowledgeGraph {
    let p = planted(0, (0.0, 0.0)).expect("fractions are valid");
    KnowledgeGraph::from_triples(p.train.iter().copied(), PLANTED_ENTITIES, PLANTED_RELATIONS).0
}

/// A denser unstructured graph for scoring throughput.
pub fn noisy_graph(n_entities: usize, n_triples: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    random_kg(&mut rng, n_entities, 8, n_triples)
}

pub fn state_for(kind: ModelKind, dim: usize, kg: &KnowledgeGraph) -> EmbeddingState {
    EmbeddingState::init(
        ScoreModel::new(kind, dim),
        kg.n_entities(),
        kg.n_relations(),
        2,
    )
}

/// A deterministic triple batch drawn from the graph.
pub fn batch(kg: &KnowledgeGraph, n: usize) -> Vec<Triple> {
    kg.triples().iter().copied().cycle().take(n).collect()
}
