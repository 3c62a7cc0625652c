//! End-to-end behavior of the alternating loop on the planted dataset.

mod common;

use std::collections::BTreeSet;

use common::oracle_ground;
use hornbeam::embedding::{ModelKind, ScoreModel, TrainConfig};
use hornbeam::hybrid::{inferred_set, run, write_iteration_csv, HybridConfig};
use hornbeam::kg::Triple;
use hornbeam::rules::{mine, MinerConfig};
use hornbeam::synth::planted;

fn small_loop_config() -> HybridConfig {
    HybridConfig {
        iterations: 3,
        top_k: 8,
        train: TrainConfig { steps: 60, batch_size: 64, ..TrainConfig::default() },
        seed: 17,
        patience: 99,
        ..HybridConfig::default()
    }
}

#[test]
fn inferred_pool_is_the_union_of_novel_oracle_predictions() {
    let data = planted(4, (0.0, 0.15)).unwrap();
    let kg = data.train_graph();
    let state = hornbeam::embedding::EmbeddingState::init(
        ScoreModel::new(ModelKind::DistMult, 8),
        hornbeam::synth::PLANTED_ENTITIES,
        hornbeam::synth::PLANTED_RELATIONS,
        1,
    );
    let mined = mine(&kg, &state, &MinerConfig::default()).unwrap();
    let top: Vec<_> = mined.into_iter().take(6).collect();

    let pool = inferred_set(&kg, &top).unwrap();
    let mut expected: BTreeSet<Triple> = BTreeSet::new();
    for m in &top {
        for t in oracle_ground(&kg, &m.rule).s_tau {
            if !kg.contains(t) {
                expected.insert(t);
            }
        }
    }
    let got: BTreeSet<Triple> = pool.iter().copied().collect();
    assert_eq!(got.len(), pool.len(), "pool has duplicates");
    assert_eq!(got, expected);
}

#[test]
fn loop_reports_are_well_formed_and_serializable() {
    let data = planted(5, (0.1, 0.1)).unwrap();
    let kg = data.train_graph();
    let valid = data.valid_graph();
    let cfg = small_loop_config();
    let out = run(&kg, &valid, ScoreModel::new(ModelKind::DistMult, 16), &cfg).unwrap();

    assert!(!out.reports.is_empty() && out.reports.len() <= cfg.iterations);
    for (i, r) in out.reports.iter().enumerate() {
        assert_eq!(r.iteration, i + 1);
        assert!(r.rules_mined >= r.rules_selected);
        assert!(r.rules_selected <= cfg.top_k);
        assert!(r.sampled <= r.g_t_size);
        assert!(r.train_loss.is_finite());
        assert!(r.valid_mrr.is_finite() && (0.0..=1.0).contains(&r.valid_mrr));
        assert!((0.0..=1.0).contains(&r.valid_hits10));
    }
    assert!(!out.rules.is_empty());
    assert!(out.state.finite());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("iters.csv");
    write_iteration_csv(&path, &out.reports).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("iter,rules_mined,rules_selected,g_t_size,sampled,train_loss,valid_mrr,valid_hits10")
    );
    assert_eq!(lines.count(), out.reports.len());
}

#[test]
fn sample_budget_caps_each_iteration() {
    let data = planted(6, (0.0, 0.1)).unwrap();
    let kg = data.train_graph();
    let empty = data.valid_graph();
    let mut cfg = small_loop_config();
    cfg.sample_budget = Some(7);
    let out = run(&kg, &empty, ScoreModel::new(ModelKind::TransE, 8), &cfg).unwrap();
    for r in &out.reports {
        assert!(r.sampled <= 7, "iteration {} sampled {}", r.iteration, r.sampled);
        assert!(r.valid_mrr.is_nan(), "no validation split, MRR should be NaN");
    }
    // Without validation the loop must run all iterations.
    assert_eq!(out.reports.len(), cfg.iterations);
}

#[test]
fn rule_accumulation_is_monotone() {
    let data = planted(7, (0.1, 0.1)).unwrap();
    let kg = data.train_graph();
    let valid = data.valid_graph();
    let mut cfg = small_loop_config();
    cfg.accumulate_rules = true;
    cfg.top_k = 3;
    let out = run(&kg, &valid, ScoreModel::new(ModelKind::DistMult, 8), &cfg).unwrap();
    let mut prev = 0;
    for r in &out.reports {
        assert!(r.rules_selected >= prev, "accumulated rule set shrank");
        prev = r.rules_selected;
    }
    assert!(out.rules.len() >= 3);
}

#[test]
fn cold_start_diverges_from_warm_start() {
    let data = planted(8, (0.0, 0.1)).unwrap();
    let kg = data.train_graph();
    // No validation split: the run returns the final state, where the
    // second iteration's starting point differs between the two modes.
    let empty = data.valid_graph();
    let mut warm = small_loop_config();
    warm.iterations = 2;
    warm.top_k = 0;
    let mut cold = warm.clone();
    cold.warm_start = false;

    let model = ScoreModel::new(ModelKind::DistMult, 8);
    let a = run(&kg, &empty, model, &warm).unwrap();
    let b = run(&kg, &empty, model, &cold).unwrap();
    assert_ne!(a.state, b.state);
}
