//! Best-first rule search.
//!
//! The queue holds partial rules ordered by head coverage (descending,
//! ties by canonical encoding), seeded with one bare head atom per
//! relation. Dequeued rules that are closed and connected are emitted;
//! everything else is refined. A candidate survives only if its head
//! coverage clears the floor and its quality strictly improves on its
//! parent's. Head-only parents carry no quality baseline, so their
//! children pass on head coverage alone.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::{
    embedding_confidence, head_groundings, quality, refine, Rule, RuleMetrics, Term,
    RefineContext,
};
use crate::embedding::EmbeddingState;
use crate::error::Result;
use crate::kg::{KnowledgeGraph, RelationId};
use crate::rules::Atom;
use crate::seed::derive_seed;

#[derive(Debug, Clone)]
pub struct MinerConfig {
    /// Blend weight between observed and embedding confidence.
    pub omega: f64,
    /// Candidates must cover strictly more than this fraction of their
    /// head relation. Also scales the constant-frequency floor.
    pub min_head_coverage: f64,
    /// Maximum atoms per rule, head included.
    pub max_len: usize,
    /// Embedding-confidence estimates sample once the prediction set
    /// exceeds this.
    pub ec_sample_cap: usize,
    pub seed: u64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            omega: 0.5,
            min_head_coverage: 0.01,
            max_len: 3,
            ec_sample_cap: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinedRule {
    pub rule: Rule,
    pub metrics: RuleMetrics,
}

struct Entry {
    head_coverage: f64,
    key: Vec<u64>,
    rule: Rule,
    /// None only for the bare head seeds, which have no quality baseline.
    metrics: Option<RuleMetrics>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.head_coverage.total_cmp(&other.head_coverage) == Ordering::Equal
            && self.key == other.key
    }
}
impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: higher coverage first, then smaller encoding.
        self.head_coverage
            .total_cmp(&other.head_coverage)
            .then_with(|| other.key.cmp(&self.key))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exhaustive best-first search for closed, connected rules of bounded
/// length, scored against the current embedding. Output is sorted by
/// quality descending, ties by canonical encoding.
pub fn mine(
    kg: &KnowledgeGraph,
    state: &EmbeddingState,
    cfg: &MinerConfig,
) -> Result<Vec<MinedRule>> {
    let min_const_freq = (cfg.min_head_coverage * kg.len() as f64).ceil().max(1.0) as u32;
    let ctx = RefineContext::new(kg, min_const_freq, cfg.max_len);

    let mut queue: BinaryHeap<Entry> = BinaryHeap::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for r in 0..kg.n_relations() as u32 {
        let r = RelationId(r);
        if kg.relation_size(r) == 0 {
            continue;
        }
        let rule = Rule::new(Atom::new(r, Term::Var(0), Term::Var(1)), vec![]);
        let key = rule.encoding();
        seen.insert(key.clone());
        queue.push(Entry { head_coverage: 1.0, key, rule, metrics: None });
    }

    let mut out: Vec<MinedRule> = Vec::new();
    while let Some(entry) = queue.pop() {
        if !entry.rule.body().is_empty()
            && entry.rule.is_closed()
            && entry.rule.is_connected()
        {
            let metrics = entry.metrics.expect("non-seed entries carry metrics");
            out.push(MinedRule { rule: entry.rule, metrics });
            continue;
        }
        let parent_q = entry.metrics.as_ref().map(|m| m.quality);
        for child in refine(&entry.rule, &ctx) {
            let key = child.encoding();
            if !seen.insert(key.clone()) {
                continue;
            }
            if !closable(&child, ctx.max_len()) {
                continue;
            }
            let Some(metrics) = measure(kg, state, cfg, &child)? else {
                continue;
            };
            if metrics.head_coverage <= cfg.min_head_coverage {
                continue;
            }
            if let Some(pq) = parent_q {
                if metrics.quality <= pq {
                    continue;
                }
            }
            queue.push(Entry {
                head_coverage: metrics.head_coverage,
                key,
                metrics: Some(metrics),
                rule: child,
            });
        }
    }

    out.sort_by(|a, b| {
        b.metrics
            .quality
            .total_cmp(&a.metrics.quality)
            .then_with(|| a.rule.encoding().cmp(&b.rule.encoding()))
    });
    Ok(out)
}

/// Variables occurring once need a future atom slot to close them; each
/// added atom offers two slots.
fn closable(rule: &Rule, max_len: usize) -> bool {
    let mut counts = [0usize; super::MAX_VARS];
    for a in rule.atoms() {
        for t in a.terms() {
            if let Term::Var(v) = t {
                counts[v as usize] += 1;
            }
        }
    }
    let open = counts.iter().filter(|&&c| c == 1).count();
    let remaining = max_len.saturating_sub(rule.len());
    open <= 2 * remaining
}

/// Full measurement of one candidate; None when the body never grounds.
fn measure(
    kg: &KnowledgeGraph,
    state: &EmbeddingState,
    cfg: &MinerConfig,
    rule: &Rule,
) -> Result<Option<RuleMetrics>> {
    let hg = head_groundings(kg, rule)?;
    let body_groundings = hg.count(kg);
    if body_groundings == 0 {
        return Ok(None);
    }
    let support = hg.observed(kg, rule);
    let relation_size = kg.relation_size(rule.head().relation);
    if relation_size == 0 {
        return Ok(None);
    }
    let standard_confidence = support as f64 / body_groundings as f64;
    let head_coverage = support as f64 / relation_size as f64;
    let ec_seed = derive_seed(cfg.seed, "ec", key_hash(&rule.encoding()));
    let ec = embedding_confidence(kg, rule, state, cfg.ec_sample_cap, ec_seed)?;
    Ok(Some(RuleMetrics {
        support,
        body_groundings,
        standard_confidence,
        head_coverage,
        embedding_confidence: ec,
        quality: quality(standard_confidence, ec, cfg.omega),
        num_new_predictions: body_groundings - support,
    }))
}

fn key_hash(key: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &k in key {
        for b in k.to_le_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
