//! Alternating embedding/rule training.
//!
//! Each global iteration trains the embedding on the current positive
//! set, mines rules from the ORIGINAL graph scored against the fresh
//! embedding, selects the top rules by quality, and feeds a score-tilted
//! sample of their novel predictions back into the positive set as hard
//! labels. Validation MRR drives early stopping and picks the returned
//! state.
//!
//! Every stochastic phase draws from its own derived seed, so the whole
//! run is reproducible and phases cannot perturb each other.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{
    embedding_learning, score, EmbeddingState, ScoreModel, TrainConfig,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_set, summarize, RankAggregation};
use crate::kg::{KnowledgeGraph, LabeledTriple, Triple};
use crate::rules::{infer_heads, mine, MinedRule, MinerConfig};
use crate::seed::derive_seed;

#[derive(Debug, Clone)]
pub struct HybridConfig {
    /// Blend weight between observed and embedding confidence in rule
    /// quality.
    pub omega: f64,
    /// Softmax temperature for prediction sampling.
    pub beta: f64,
    /// Rules kept per iteration.
    pub top_k: usize,
    /// Global iterations.
    pub iterations: usize,
    /// Predictions sampled per iteration; None takes half the pool.
    pub sample_budget: Option<usize>,
    pub min_head_coverage: f64,
    pub max_rule_len: usize,
    pub ec_sample_cap: usize,
    pub train: TrainConfig,
    pub seed: u64,
    /// Continue from the previous iteration's parameters (the default)
    /// instead of re-initializing each iteration.
    pub warm_start: bool,
    /// Keep rules from earlier iterations instead of replacing the set.
    pub accumulate_rules: bool,
    /// Iterations without a validation improvement before stopping.
    pub patience: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            omega: 0.5,
            beta: 1.0,
            top_k: 100,
            iterations: 10,
            sample_budget: None,
            min_head_coverage: 0.01,
            max_rule_len: 3,
            ec_sample_cap: 10_000,
            train: TrainConfig::default(),
            seed: 0,
            warm_start: true,
            accumulate_rules: false,
            patience: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub iteration: usize,
    pub rules_mined: usize,
    pub rules_selected: usize,
    pub g_t_size: usize,
    pub sampled: usize,
    pub train_loss: f64,
    pub valid_mrr: f64,
    pub valid_hits10: f64,
}

#[derive(Debug)]
pub struct HybridOutcome {
    /// Parameters from the best-validation iteration (the final ones when
    /// no validation set is given).
    pub state: EmbeddingState,
    pub rules: Vec<MinedRule>,
    pub reports: Vec<IterationReport>,
}

/// Union of the rules' head instantiations minus the original graph,
/// ascending and distinct.
pub fn inferred_set(kg0: &KnowledgeGraph, rules: &[MinedRule]) -> Result<Vec<Triple>> {
    let mut set: HashSet<Triple> = HashSet::new();
    for m in rules {
        for t in infer_heads(kg0, &m.rule)? {
            if !kg0.contains(t) {
                set.insert(t);
            }
        }
    }
    let mut out: Vec<Triple> = set.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

/// Draws min(budget, |pool|) distinct triples, where draw probabilities
/// follow the score softmax at temperature beta and later draws
/// renormalize over the remainder. Implemented with exponential races
/// (perturbed keys), which realizes exactly that sequential distribution
/// without forming the softmax. Returned triples are positives, ordered
/// as drawn.
pub fn importance_sample(
    pool: &[Triple],
    state: &EmbeddingState,
    beta: f64,
    budget: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LabeledTriple>> {
    if pool.is_empty() {
        return Err(Error::Sampling("cannot sample from an empty prediction pool".into()));
    }
    let mut keyed: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let u: f64 = loop {
                let u = rng.gen::<f64>();
                if u > 0.0 {
                    break u;
                }
            };
            let gumbel = -(-u.ln()).ln();
            (beta * score(state, t) + gumbel, i)
        })
        .collect();
    let take = budget.min(pool.len());
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keyed[..take]
        .iter()
        .map(|&(_, i)| LabeledTriple::positive(pool[i]))
        .collect())
}

/// Runs the full alternating procedure against `kg0`, validating on
/// `valid` each iteration (pass an empty graph to disable validation and
/// early stopping).
pub fn run(
    kg0: &KnowledgeGraph,
    valid: &KnowledgeGraph,
    model: ScoreModel,
    cfg: &HybridConfig,
) -> Result<HybridOutcome> {
    if kg0.is_empty() {
        return Err(Error::Config("cannot run on an empty training graph".into()));
    }
    if cfg.iterations == 0 {
        return Err(Error::Config("iteration count must be positive".into()));
    }
    let n_entities = kg0.n_entities().max(valid.n_entities());
    let n_relations = kg0.n_relations().max(valid.n_relations());

    let mut state = EmbeddingState::init(
        model,
        n_entities,
        n_relations,
        derive_seed(cfg.seed, "init", 0),
    );

    // Filter for in-loop validation: everything known so far.
    let valid_filter: HashSet<Triple> = kg0
        .triples()
        .iter()
        .chain(valid.triples())
        .copied()
        .collect();

    let mut positives: Vec<Triple> = kg0.triples().to_vec();
    let mut positive_set: HashSet<Triple> = positives.iter().copied().collect();

    let mut rules: Vec<MinedRule> = Vec::new();
    let mut reports: Vec<IterationReport> = Vec::new();
    let mut best: Option<(f64, EmbeddingState)> = None;
    let mut stale = 0usize;

    for i in 1..=cfg.iterations {
        if !cfg.warm_start && i > 1 {
            state = EmbeddingState::init(
                model,
                n_entities,
                n_relations,
                derive_seed(cfg.seed, "init", i as u64),
            );
        }

        let mut tcfg = cfg.train.clone();
        tcfg.seed = derive_seed(cfg.seed, "train", i as u64);
        let train_report = embedding_learning(&mut state, &positives, &tcfg)?;

        let (valid_mrr, valid_hits10) = if valid.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let ranks = evaluate_set(
                &state,
                valid.triples(),
                &valid_filter,
                n_entities,
                derive_seed(cfg.seed, "eval", i as u64),
            );
            let m = summarize(&ranks, RankAggregation::PerTripleAverage)?;
            (m.mrr, m.hits10)
        };

        let mut rules_mined = 0;
        let mut g_t_size = 0;
        let mut sampled = 0;
        if cfg.top_k > 0 {
            let mcfg = MinerConfig {
                omega: cfg.omega,
                min_head_coverage: cfg.min_head_coverage,
                max_len: cfg.max_rule_len,
                ec_sample_cap: cfg.ec_sample_cap,
                seed: derive_seed(cfg.seed, "mine", i as u64),
            };
            let mined = mine(kg0, &state, &mcfg)?;
            rules_mined = mined.len();
            let selected = select_top_k(mined, cfg.top_k);
            if cfg.accumulate_rules {
                merge_rules(&mut rules, selected);
            } else {
                rules = selected;
            }

            if !rules.is_empty() {
                let pool = inferred_set(kg0, &rules)?;
                g_t_size = pool.len();
                if !pool.is_empty() {
                    let budget = cfg.sample_budget.unwrap_or(pool.len().div_ceil(2));
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sample", i as u64));
                    let draws =
                        importance_sample(&pool, &state, cfg.beta, budget, &mut rng)?;
                    for d in &draws {
                        if positive_set.insert(d.triple) {
                            positives.push(d.triple);
                        }
                    }
                    sampled = draws.len();
                }
            }
        }

        reports.push(IterationReport {
            iteration: i,
            rules_mined,
            rules_selected: rules.len(),
            g_t_size,
            sampled,
            train_loss: train_report.final_loss,
            valid_mrr,
            valid_hits10,
        });

        if !valid.is_empty() {
            let improved = best.as_ref().map_or(true, |(b, _)| valid_mrr > *b);
            if improved {
                best = Some((valid_mrr, state.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }

    let state = match best {
        Some((_, s)) => s,
        None => state,
    };
    Ok(HybridOutcome { state, rules, reports })
}

/// Top K by quality; boundary ties prefer higher support, then the
/// smaller encoding.
fn select_top_k(mut mined: Vec<MinedRule>, k: usize) -> Vec<MinedRule> {
    mined.sort_by(|a, b| {
        b.metrics
            .quality
            .total_cmp(&a.metrics.quality)
            .then_with(|| b.metrics.support.cmp(&a.metrics.support))
            .then_with(|| a.rule.encoding().cmp(&b.rule.encoding()))
    });
    mined.truncate(k);
    mined
}

/// Replaces stale copies of re-mined rules, appends genuinely new ones.
fn merge_rules(rules: &mut Vec<MinedRule>, fresh: Vec<MinedRule>) {
    for f in fresh {
        match rules.iter_mut().find(|r| r.rule == f.rule) {
            Some(slot) => *slot = f,
            None => rules.push(f),
        }
    }
}

pub fn write_iteration_csv(path: impl AsRef<Path>, reports: &[IterationReport]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        out,
        "iter,rules_mined,rules_selected,g_t_size,sampled,train_loss,valid_mrr,valid_hits10"
    )
    .map_err(io)?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            r.rules_mined,
            r.rules_selected,
            r.g_t_size,
            r.sampled,
            r.train_loss,
            r.valid_mrr,
            r.valid_hits10,
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::ModelKind;
    use crate::kg::{EntityId, RelationId};

    fn t(h: u32, r: u32, tl: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(r), EntityId(tl))
    }

    fn chain_kg() -> KnowledgeGraph {
        let mut triples = Vec::new();
        for i in 0..12u32 {
            triples.push(t(i, 0, 20 + i));
            triples.push(t(20 + i, 1, 40 + i));
            if i < 10 {
                triples.push(t(i, 2, 40 + i)); // implied by the chain
            }
        }
        KnowledgeGraph::from_triples(triples, 60, 3).0
    }

    #[test]
    fn importance_sample_exhausts_pool() {
        let pool: Vec<Triple> = (0..5).map(|i| t(i, 0, i + 1)).collect();
        let state = EmbeddingState::init(ScoreModel::new(ModelKind::DistMult, 4), 10, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = importance_sample(&pool, &state, 1.0, 99, &mut rng).unwrap();
        assert_eq!(got.len(), 5);
        let mut triples: Vec<Triple> = got.iter().map(|l| l.triple).collect();
        triples.sort_unstable();
        assert_eq!(triples, pool);
        assert!(got.iter().all(|l| l.positive));

        assert!(importance_sample(&[], &state, 1.0, 1, &mut rng).is_err());
    }

    #[test]
    fn importance_sample_is_seeded() {
        let pool: Vec<Triple> = (0..30).map(|i| t(i, 0, i + 1)).collect();
        let state = EmbeddingState::init(ScoreModel::new(ModelKind::TransE, 8), 40, 1, 5);
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let x = importance_sample(&pool, &state, 0.5, 10, &mut a).unwrap();
        let y = importance_sample(&pool, &state, 0.5, 10, &mut b).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn inferred_set_excludes_known_and_dedups() {
        let kg = chain_kg();
        let state = EmbeddingState::init(ScoreModel::new(ModelKind::DistMult, 4), 60, 3, 2);
        let mined = mine(&kg, &state, &MinerConfig::default()).unwrap();
        assert!(!mined.is_empty());
        let pool = inferred_set(&kg, &mined).unwrap();
        for p in &pool {
            assert!(!kg.contains(*p));
        }
        for w in pool.windows(2) {
            assert!(w[0] < w[1]);
        }
        // The chain rule's missing two implications must be in the pool.
        assert!(pool.contains(&t(10, 2, 50)));
        assert!(pool.contains(&t(11, 2, 51)));
    }

    #[test]
    fn positives_grow_monotonically_and_run_is_deterministic() {
        let kg = chain_kg();
        let (valid, _) = KnowledgeGraph::from_triples([t(10, 2, 50)], 60, 3);
        let cfg = HybridConfig {
            iterations: 3,
            top_k: 5,
            train: TrainConfig { steps: 20, batch_size: 16, ..TrainConfig::default() },
            seed: 3,
            patience: 99,
            ..HybridConfig::default()
        };
        let model = ScoreModel::new(ModelKind::DistMult, 8);
        let a = run(&kg, &valid, model, &cfg).unwrap();
        let b = run(&kg, &valid, model, &cfg).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.reports.len(), b.reports.len());
        for (x, y) in a.reports.iter().zip(&b.reports) {
            assert_eq!(x.sampled, y.sampled);
            assert_eq!(x.valid_mrr, y.valid_mrr);
        }
    }

    #[test]
    fn k_zero_matches_standalone_training() {
        let kg = chain_kg();
        let empty = KnowledgeGraph::from_triples([], 60, 3).0;
        let cfg = HybridConfig {
            iterations: 1,
            top_k: 0,
            train: TrainConfig { steps: 25, batch_size: 8, ..TrainConfig::default() },
            seed: 11,
            ..HybridConfig::default()
        };
        let model = ScoreModel::new(ModelKind::TransE, 8);
        let out = run(&kg, &empty, model, &cfg).unwrap();

        let mut manual = EmbeddingState::init(model, 60, 3, derive_seed(11, "init", 0));
        let mut tcfg = cfg.train.clone();
        tcfg.seed = derive_seed(11, "train", 1);
        embedding_learning(&mut manual, kg.triples(), &tcfg).unwrap();
        assert_eq!(out.state, manual);
        assert!(out.rules.is_empty());
        assert_eq!(out.reports.len(), 1);
        assert_eq!(out.reports[0].rules_mined, 0);
    }

    #[test]
    fn early_stopping_respects_patience() {
        let kg = chain_kg();
        let (valid, _) = KnowledgeGraph::from_triples([t(10, 2, 50), t(11, 2, 51)], 60, 3);
        let cfg = HybridConfig {
            iterations: 8,
            top_k: 0,
            // Aggressive LR on a tiny graph: validation quality wobbles,
            // so stopping fires well before 8 iterations.
            train: TrainConfig {
                steps: 5,
                batch_size: 64,
                learning_rate: 2.0,
                ..TrainConfig::default()
            },
            seed: 2,
            patience: 2,
            ..HybridConfig::default()
        };
        let model = ScoreModel::new(ModelKind::DistMult, 4);
        let out = run(&kg, &valid, model, &cfg).unwrap();
        let best_iter = out
            .reports
            .iter()
            .max_by(|a, b| a.valid_mrr.total_cmp(&b.valid_mrr))
            .unwrap()
            .iteration;
        assert!(
            out.reports.len() <= best_iter + cfg.patience,
            "ran {} iterations, best at {best_iter}",
            out.reports.len()
        );
    }
}
