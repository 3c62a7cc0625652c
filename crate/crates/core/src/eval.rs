//! Filtered link-prediction evaluation.
//!
//! For each test triple the true head (then tail) competes against every
//! entity; candidates that form a known triple elsewhere in the corpus
//! are excluded. Score ties are broken by placing the true entity
//! uniformly at random within its tie group, which is equivalent to
//! ranking a random permutation of the group. Each test triple gets its
//! own RNG stream derived from (seed, index), so parallel scheduling
//! cannot change any rank.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{score, EmbeddingState};
use crate::error::{Error, Result};
use crate::kg::{Dictionary, EntityId, KnowledgeGraph, Triple};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankResult {
    pub triple: Triple,
    pub head_rank: u32,
    pub tail_rank: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n_triples: usize,
}

/// How head and tail ranks combine into the reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankAggregation {
    /// Average the two ranks per triple, then take reciprocals. The
    /// per-triple average is also what Hits@N thresholds.
    #[default]
    PerTripleAverage,
    /// Treat head and tail ranks as separate predictions (the convention
    /// most published baselines use).
    Pooled,
}

/// Filtered rank of the true head and tail of `t` among all entities.
/// Draws two RNG values: one for the head tie group, then the tail's.
pub fn rank_triplet(
    state: &EmbeddingState,
    t: Triple,
    filter: &HashSet<Triple>,
    n_entities: usize,
    rng: &mut impl Rng,
) -> RankResult {
    let head_rank = rank_side(state, t, true, filter, n_entities, rng);
    let tail_rank = rank_side(state, t, false, filter, n_entities, rng);
    RankResult { triple: t, head_rank, tail_rank }
}

fn rank_side(
    state: &EmbeddingState,
    t: Triple,
    corrupt_head: bool,
    filter: &HashSet<Triple>,
    n_entities: usize,
    rng: &mut impl Rng,
) -> u32 {
    let true_score = score(state, t);
    let true_entity = if corrupt_head { t.head } else { t.tail };
    let mut greater = 0u32;
    let mut equal = 0u32;
    for e in 0..n_entities as u32 {
        let e = EntityId(e);
        if e == true_entity {
            continue;
        }
        let cand = if corrupt_head {
            Triple::new(e, t.relation, t.tail)
        } else {
            Triple::new(t.head, t.relation, e)
        };
        if filter.contains(&cand) {
            continue;
        }
        let s = score(state, cand);
        if s > true_score {
            greater += 1;
        } else if s == true_score {
            equal += 1;
        }
    }
    // Uniform position inside the tie group.
    1 + greater + rng.gen_range(0..=equal)
}

/// Ranks every triple, in parallel, reproducibly for a fixed seed.
pub fn evaluate_set(
    state: &EmbeddingState,
    triples: &[Triple],
    filter: &HashSet<Triple>,
    n_entities: usize,
    seed: u64,
) -> Vec<RankResult> {
    triples
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "rank", i as u64));
            rank_triplet(state, t, filter, n_entities, &mut rng)
        })
        .collect()
}

pub fn summarize(results: &[RankResult], agg: RankAggregation) -> Result<MetricsSummary> {
    if results.is_empty() {
        return Err(Error::Config("cannot summarize zero rank results".into()));
    }
    let ranks: Vec<f64> = match agg {
        RankAggregation::PerTripleAverage => results
            .iter()
            .map(|r| (r.head_rank as f64 + r.tail_rank as f64) / 2.0)
            .collect(),
        RankAggregation::Pooled => results
            .iter()
            .flat_map(|r| [r.head_rank as f64, r.tail_rank as f64])
            .collect(),
    };
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n;
    let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(MetricsSummary {
        mrr,
        hits1: hits(1.0),
        hits3: hits(3.0),
        hits10: hits(10.0),
        n_triples: results.len(),
    })
}

/// Fraction of predictions confirmed by the test graph. None when there
/// are no predictions to judge.
pub fn rule_precision(predictions: &[Triple], test: &KnowledgeGraph) -> Option<f64> {
    if predictions.is_empty() {
        return None;
    }
    let hits = predictions.iter().filter(|t| test.contains(**t)).count();
    Some(hits as f64 / predictions.len() as f64)
}

/// Which endpoints must exceed the sparsity threshold for a triple to
/// stay in the sparse split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SparseEndpoint {
    #[default]
    Either,
    Both,
}

/// Keeps the eval triples whose endpoint sparsity (w.r.t. the training
/// graph) exceeds `threshold`.
pub fn sparse_filter(
    eval_set: &[Triple],
    train: &KnowledgeGraph,
    threshold: f64,
    mode: SparseEndpoint,
) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for &t in eval_set {
        let h = train.sparsity(t.head)?;
        let tl = train.sparsity(t.tail)?;
        let keep = match mode {
            SparseEndpoint::Either => h > threshold || tl > threshold,
            SparseEndpoint::Both => h > threshold && tl > threshold,
        };
        if keep {
            out.push(t);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub split: String,
    pub model: String,
    pub summary: MetricsSummary,
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "split,model,mrr,hits1,hits3,hits10,n_triples").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.split, r.model, r.summary.mrr, r.summary.hits1, r.summary.hits3,
            r.summary.hits10, r.summary.n_triples,
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Per-triple rank dump with resolved names, for case-by-case inspection.
pub fn write_rank_dump(
    path: impl AsRef<Path>,
    results: &[RankResult],
    entities: &Dictionary,
    relations: &Dictionary,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "h,r,t,head_rank,tail_rank").map_err(io)?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{}",
            entities.name(r.triple.head.0).unwrap_or("?"),
            relations.name(r.triple.relation.0).unwrap_or("?"),
            entities.name(r.triple.tail.0).unwrap_or("?"),
            r.head_rank,
            r.tail_rank,
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
