//! The five commands.
//!
//! Shared shape: resolve settings and print the provenance table, check
//! the inputs exist, read them, then work inside the output directory
//! behind an `.incomplete` marker. The marker is written before the
//! first artifact and removed after the manifest, so a directory that
//! still has one holds a partial run.

use std::collections::HashSet;
use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;

use hornbeam::embedding::{embedding_learning, EmbeddingState, ModelKind, Norm, TrainConfig};
use hornbeam::eval::{
    evaluate_set, sparse_filter, summarize, write_metrics_csv, write_rank_dump, MetricsRow,
    RankAggregation, SparseEndpoint,
};
use hornbeam::hybrid::{inferred_set, write_iteration_csv, HybridConfig};
use hornbeam::rules::{read_rules, write_rules, MinedRule, MinerConfig};
use hornbeam::seed::derive_seed;
use hornbeam::{Dictionary, KnowledgeGraph, Triple};

use crate::manifest::Manifest;
use crate::settings::{resolve, Resolved, Source};
use crate::{usage, RunArgs};

pub fn train(args: &RunArgs) -> anyhow::Result<()> {
    let r = resolve(args)?;
    print!("{}", r.table());
    note_unused(args, &[]);
    let train_path = require(&args.train, "--train")?;
    let splits = load_splits(Dictionary::new(), Dictionary::new(), train_path, None, None)?;
    let s = &r.settings;

    let mut out = OutDir::begin(&args.out)?;
    let mut state = EmbeddingState::init(
        r.score_model()?,
        splits.entities.len(),
        splits.relations.len(),
        derive_seed(s.seed, "init", 0),
    );
    let tcfg = TrainConfig {
        learning_rate: s.lr,
        batch_size: s.batch,
        negatives: s.neg_ratio,
        steps: s.inner_steps,
        seed: derive_seed(s.seed, "train", 0),
        resample_negatives: true,
    };
    let report = embedding_learning(&mut state, splits.train.triples(), &tcfg)?;
    println!(
        "trained {} steps: loss {:.4} -> {:.4}",
        report.steps_run, report.initial_loss, report.final_loss
    );
    save_state(&mut out, &state, &splits)?;

    let mut m = Manifest::new("train", r.settings.clone());
    m.input("train", train_path)?;
    out.finish(m)
}

pub fn mine(args: &RunArgs) -> anyhow::Result<()> {
    let r = resolve(args)?;
    print!("{}", r.table());
    note_unused(args, &["--checkpoint"]);
    let train_path = require(&args.train, "--train")?;
    let ckpt_path = require(&args.checkpoint, "--checkpoint")?;

    let state = EmbeddingState::load(ckpt_path)?;
    reconcile(&r, &state)?;
    let (entities, relations) = sibling_dictionaries(ckpt_path)?;
    let splits = load_splits(entities, relations, train_path, None, None)?;
    check_coverage(&state, splits.entities.len(), splits.relations.len())?;
    let s = &r.settings;

    let mut out = OutDir::begin(&args.out)?;
    let mcfg = MinerConfig {
        omega: s.omega,
        min_head_coverage: s.min_hc,
        seed: derive_seed(s.seed, "mine", 0),
        ..MinerConfig::default()
    };
    let rules = hornbeam::rules::mine(&splits.train, &state, &mcfg)?;
    println!("mined {} rules", rules.len());
    let path = out.path("rules.tsv");
    write_rules(&path, &rules, &splits.entities, &splits.relations)?;
    println!("wrote {}", path.display());

    let mut m = Manifest::new("mine", r.settings.clone());
    m.input("train", train_path)?;
    m.input("checkpoint", ckpt_path)?;
    out.finish(m)
}

pub fn hybrid(args: &RunArgs) -> anyhow::Result<()> {
    let t0 = Instant::now();
    let r = resolve(args)?;
    print!("{}", r.table());
    note_unused(args, &["--valid"]);
    let train_path = require(&args.train, "--train")?;
    let valid_path = optional(&args.valid, "--valid")?;
    let splits = load_splits(
        Dictionary::new(),
        Dictionary::new(),
        train_path,
        valid_path,
        None,
    )?;
    let s = &r.settings;
    let valid_kg = match splits.valid {
        Some(ref kg) => kg.clone(),
        None => empty_graph(&splits),
    };

    let mut out = OutDir::begin(&args.out)?;
    let hcfg = HybridConfig {
        omega: s.omega,
        beta: s.beta,
        top_k: s.topk,
        iterations: s.iters,
        min_head_coverage: s.min_hc,
        train: TrainConfig {
            learning_rate: s.lr,
            batch_size: s.batch,
            negatives: s.neg_ratio,
            steps: s.inner_steps,
            resample_negatives: true,
            seed: 0,
        },
        seed: s.seed,
        patience: s.patience,
        ..HybridConfig::default()
    };
    let outcome = hornbeam::hybrid::run(&splits.train, &valid_kg, r.score_model()?, &hcfg)?;
    for rep in &outcome.reports {
        println!(
            "iter {:>2}: mined {:>4}, kept {:>3}, pool {:>5}, sampled {:>5}, loss {:.4}, valid mrr {:.4}, hits@10 {:.4}",
            rep.iteration,
            rep.rules_mined,
            rep.rules_selected,
            rep.g_t_size,
            rep.sampled,
            rep.train_loss,
            rep.valid_mrr,
            rep.valid_hits10,
        );
    }

    save_state(&mut out, &outcome.state, &splits)?;
    let path = out.path("rules.tsv");
    write_rules(&path, &outcome.rules, &splits.entities, &splits.relations)?;
    println!("wrote {}", path.display());
    let path = out.path("iterations.csv");
    write_iteration_csv(&path, &outcome.reports)?;
    println!("wrote {}", path.display());

    let mut m = Manifest::new("hybrid", r.settings.clone());
    m.input("train", train_path)?;
    if let Some(p) = valid_path {
        m.input("valid", p)?;
    }
    out.finish(m)?;
    println!("done in {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}

pub fn eval(args: &RunArgs) -> anyhow::Result<()> {
    let r = resolve(args)?;
    print!("{}", r.table());
    note_unused(args, &["--valid", "--test", "--checkpoint"]);
    let train_path = require(&args.train, "--train")?;
    let test_path = require(&args.test, "--test")?;
    let ckpt_path = require(&args.checkpoint, "--checkpoint")?;
    let valid_path = optional(&args.valid, "--valid")?;

    let state = EmbeddingState::load(ckpt_path)?;
    reconcile(&r, &state)?;
    let (entities, relations) = sibling_dictionaries(ckpt_path)?;
    let splits = load_splits(entities, relations, train_path, valid_path, Some(test_path))?;
    check_coverage(&state, splits.entities.len(), splits.relations.len())?;
    let s = &r.settings;
    let test = splits.test.as_ref().expect("test split was required");

    let mut out = OutDir::begin(&args.out)?;
    let mut filter: HashSet<Triple> = splits.train.triples().iter().copied().collect();
    if let Some(kg) = &splits.valid {
        filter.extend(kg.triples().iter().copied());
    }
    filter.extend(test.triples().iter().copied());

    let mut eval_set: Vec<Triple> = test.triples().to_vec();
    if let Some(threshold) = s.sparse_threshold {
        let mode = match s.sparse_mode.as_str() {
            "both" => SparseEndpoint::Both,
            _ => SparseEndpoint::Either,
        };
        eval_set = sparse_filter(&eval_set, &splits.train, threshold, mode)?;
        println!(
            "sparse filter (> {threshold}): kept {} of {} test triples",
            eval_set.len(),
            test.len()
        );
    }
    if eval_set.is_empty() {
        anyhow::bail!("no test triples left to rank");
    }

    let results = evaluate_set(
        &state,
        &eval_set,
        &filter,
        splits.entities.len(),
        derive_seed(s.seed, "eval", 0),
    );
    let agg = if args.pooled_ranks {
        RankAggregation::Pooled
    } else {
        RankAggregation::PerTripleAverage
    };
    let summary = summarize(&results, agg)?;
    println!(
        "test: mrr {:.4}, hits@1 {:.4}, hits@3 {:.4}, hits@10 {:.4} ({} triples)",
        summary.mrr, summary.hits1, summary.hits3, summary.hits10, summary.n_triples
    );

    let path = out.path("metrics.csv");
    let row = MetricsRow {
        split: "test".into(),
        model: state.model.kind.name().into(),
        summary,
    };
    write_metrics_csv(&path, &[row])?;
    println!("wrote {}", path.display());
    let path = out.path("ranks.csv");
    write_rank_dump(&path, &results, &splits.entities, &splits.relations)?;
    println!("wrote {}", path.display());

    let mut m = Manifest::new("eval", r.settings.clone());
    m.rank_aggregation = Some(if args.pooled_ranks { "pooled" } else { "per-triple-average" });
    m.input("train", train_path)?;
    if let Some(p) = valid_path {
        m.input("valid", p)?;
    }
    m.input("test", test_path)?;
    m.input("checkpoint", ckpt_path)?;
    out.finish(m)
}

pub fn rules_eval(args: &RunArgs) -> anyhow::Result<()> {
    let r = resolve(args)?;
    print!("{}", r.table());
    note_unused(args, &["--test", "--rules"]);
    let train_path = require(&args.train, "--train")?;
    let test_path = require(&args.test, "--test")?;
    let rules_path = require(&args.rules, "--rules")?;
    let ks = parse_ks(args.ks.as_deref())?;

    let splits = load_splits(
        Dictionary::new(),
        Dictionary::new(),
        train_path,
        None,
        Some(test_path),
    )?;
    let test = splits.test.as_ref().expect("test split was required");
    let mut rules = read_rules(rules_path, &splits.entities, &splits.relations)?;

    let mut out = OutDir::begin(&args.out)?;
    let csv_path = out.path("rules_eval.csv");
    let file = File::create(&csv_path)
        .with_context(|| format!("cannot create {}", csv_path.display()))?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "k,rules_used,predictions,hits,precision")?;

    if rules.is_empty() {
        println!("no rules in {}; nothing to evaluate", rules_path.display());
    } else {
        sort_by_quality(&mut rules);
        println!("loaded {} rules", rules.len());
        for &k in &ks {
            let used = k.min(rules.len());
            let all = if k > rules.len() { " (all rules)" } else { "" };
            let predictions = inferred_set(&splits.train, &rules[..used])?;
            let hits = predictions.iter().filter(|t| test.contains(**t)).count();
            if predictions.is_empty() {
                println!("k={k}: {used} rules{all}, no unobserved predictions; precision undefined");
                writeln!(csv, "{k},{used},0,0,NA")?;
            } else {
                let precision = hits as f64 / predictions.len() as f64;
                println!(
                    "k={k}: precision {precision:.3} ({used} rules{all}, {} predictions, {hits} in test)",
                    predictions.len()
                );
                writeln!(csv, "{k},{used},{},{hits},{precision}", predictions.len())?;
            }
        }
    }
    csv.flush()?;
    println!("wrote {}", csv_path.display());

    let mut m = Manifest::new("rules-eval", r.settings.clone());
    m.ks = Some(ks);
    m.input("train", train_path)?;
    m.input("test", test_path)?;
    m.input("rules", rules_path)?;
    out.finish(m)
}

/// Same ordering the loop uses when it keeps its top k.
fn sort_by_quality(rules: &mut [MinedRule]) {
    rules.sort_by(|a, b| {
        b.metrics
            .quality
            .total_cmp(&a.metrics.quality)
            .then_with(|| b.metrics.support.cmp(&a.metrics.support))
            .then_with(|| a.rule.encoding().cmp(&b.rule.encoding()))
    });
}

fn parse_ks(raw: Option<&str>) -> anyhow::Result<Vec<usize>> {
    let raw = raw.unwrap_or("10,50,100");
    let mut ks = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        match part.parse::<usize>() {
            Ok(k) if k > 0 => ks.push(k),
            _ => {
                return Err(usage(format!(
                    "--ks expects comma-separated positive integers, got `{part}`"
                )))
            }
        }
    }
    Ok(ks)
}

/// Output directory with an unfinished-run marker.
struct OutDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl OutDir {
    fn begin(dir: &Path) -> anyhow::Result<OutDir> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        fs::write(dir.join(".incomplete"), b"")
            .with_context(|| format!("cannot write into {}", dir.display()))?;
        Ok(OutDir { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    /// Hands out an artifact path and records it for the manifest.
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    /// Writes the manifest last and only then clears the marker.
    fn finish(self, mut manifest: Manifest) -> anyhow::Result<()> {
        manifest.artifacts = self.artifacts;
        let path = self.dir.join("manifest.json");
        manifest.write(&path)?;
        println!("wrote {}", path.display());
        fs::remove_file(self.dir.join(".incomplete"))?;
        Ok(())
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| usage(format!("{flag} is required for this command")))?;
    if !p.is_file() {
        return Err(usage(format!("{flag} file `{}` not found", p.display())));
    }
    Ok(p)
}

fn optional<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<Option<&'a Path>> {
    match path.as_deref() {
        Some(p) if !p.is_file() => Err(usage(format!("{flag} file `{}` not found", p.display()))),
        other => Ok(other),
    }
}

fn note_unused(args: &RunArgs, used: &[&str]) {
    let given = [
        ("--valid", args.valid.is_some()),
        ("--test", args.test.is_some()),
        ("--checkpoint", args.checkpoint.is_some()),
        ("--rules", args.rules.is_some()),
    ];
    for (flag, present) in given {
        if present && !used.contains(&flag) {
            println!("note: {flag} is not used by this command");
        }
    }
}

struct Splits {
    entities: Dictionary,
    relations: Dictionary,
    train: KnowledgeGraph,
    valid: Option<KnowledgeGraph>,
    test: Option<KnowledgeGraph>,
}

/// Loads the given splits in train, valid, test order over shared
/// dictionaries, then rebuilds each graph against the final entity and
/// relation universe so indexes agree across splits.
fn load_splits(
    mut entities: Dictionary,
    mut relations: Dictionary,
    train: &Path,
    valid: Option<&Path>,
    test: Option<&Path>,
) -> anyhow::Result<Splits> {
    let report = |name: &str, kg: &KnowledgeGraph, dups: usize| {
        if dups > 0 {
            println!("{name}: {} triples ({dups} duplicates dropped)", kg.len());
        } else {
            println!("{name}: {} triples", kg.len());
        }
    };
    let loaded = KnowledgeGraph::load_tsv(train, &mut entities, &mut relations)?;
    report("train", &loaded.kg, loaded.duplicates);
    let train_kg = loaded.kg;
    let valid_kg = match valid {
        Some(p) => {
            let loaded = KnowledgeGraph::load_tsv(p, &mut entities, &mut relations)?;
            report("valid", &loaded.kg, loaded.duplicates);
            Some(loaded.kg)
        }
        None => None,
    };
    let test_kg = match test {
        Some(p) => {
            let loaded = KnowledgeGraph::load_tsv(p, &mut entities, &mut relations)?;
            report("test", &loaded.kg, loaded.duplicates);
            Some(loaded.kg)
        }
        None => None,
    };

    let ne = entities.len();
    let nr = relations.len();
    println!("universe: {ne} entities, {nr} relations");
    let realign = |kg: KnowledgeGraph| {
        if kg.n_entities() == ne && kg.n_relations() == nr {
            kg
        } else {
            KnowledgeGraph::from_triples(kg.triples().to_vec(), ne, nr).0
        }
    };
    Ok(Splits {
        train: realign(train_kg),
        valid: valid_kg.map(realign),
        test: test_kg.map(realign),
        entities,
        relations,
    })
}

fn empty_graph(splits: &Splits) -> KnowledgeGraph {
    KnowledgeGraph::from_triples(
        Vec::new(),
        splits.entities.len(),
        splits.relations.len(),
    )
    .0
}

/// Checkpoint plus the dictionaries that pin its row order. Embedding
/// rows are meaningless without the interning order they were trained
/// under, so the three files travel together.
fn save_state(out: &mut OutDir, state: &EmbeddingState, splits: &Splits) -> anyhow::Result<()> {
    let path = out.path("embeddings.ckpt");
    state.save(&path)?;
    println!("wrote {}", path.display());
    let path = out.path("entities.tsv");
    splits.entities.write_tsv(&path)?;
    println!("wrote {}", path.display());
    let path = out.path("relations.tsv");
    splits.relations.write_tsv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Preloads interning order from the dictionaries written next to the
/// checkpoint, when they are present. Without them the triple files
/// must be passed in the order the original run used.
fn sibling_dictionaries(ckpt: &Path) -> anyhow::Result<(Dictionary, Dictionary)> {
    let mut entities = Dictionary::new();
    let mut relations = Dictionary::new();
    let dir = ckpt.parent().unwrap_or_else(|| Path::new("."));
    let (e, r) = (dir.join("entities.tsv"), dir.join("relations.tsv"));
    if e.is_file() && r.is_file() {
        read_dictionary(&e, &mut entities)?;
        read_dictionary(&r, &mut relations)?;
        println!(
            "dictionaries preloaded from {} ({} entities, {} relations)",
            dir.display(),
            entities.len(),
            relations.len()
        );
    }
    Ok((entities, relations))
}

fn read_dictionary(path: &Path, into: &mut Dictionary) -> anyhow::Result<()> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| anyhow::anyhow!("{}:{}: expected id<TAB>name", path.display(), i + 1))?;
        let id: u32 = id
            .parse()
            .map_err(|_| anyhow::anyhow!("{}:{}: bad id `{id}`", path.display(), i + 1))?;
        let got = into.intern(name);
        if got != id {
            anyhow::bail!(
                "{}:{}: id {id} for `{name}` lands at position {got}; file is out of order",
                path.display(),
                i + 1
            );
        }
    }
    Ok(())
}

/// A checkpoint carries its own model shape; explicitly requested
/// shapes must agree with it. Defaults defer to the checkpoint.
fn reconcile(r: &Resolved, state: &EmbeddingState) -> anyhow::Result<()> {
    let ck = state.model;
    if r.source("model") != Source::Default {
        let asked = ModelKind::parse(&r.settings.model)?;
        if asked != ck.kind {
            anyhow::bail!(
                "checkpoint holds a {} model but {} was requested",
                ck.kind.name(),
                asked.name()
            );
        }
    }
    if r.source("dim") != Source::Default && r.settings.dim != ck.dim {
        anyhow::bail!(
            "checkpoint dimension is {} but {} was requested",
            ck.dim,
            r.settings.dim
        );
    }
    if r.source("norm") != Source::Default && r.norm() != ck.norm {
        anyhow::bail!(
            "checkpoint norm is {} but {} was requested",
            norm_name(ck.norm),
            norm_name(r.norm())
        );
    }
    Ok(())
}

fn norm_name(n: Norm) -> &'static str {
    match n {
        Norm::L2 => "l2",
        Norm::L1 => "l1",
    }
}

fn check_coverage(state: &EmbeddingState, entities: usize, relations: usize) -> anyhow::Result<()> {
    if entities > state.n_entities() || relations > state.n_relations() {
        anyhow::bail!(
            "checkpoint covers {} entities and {} relations, but the data has {entities} and {relations}",
            state.n_entities(),
            state.n_relations()
        );
    }
    Ok(())
}
