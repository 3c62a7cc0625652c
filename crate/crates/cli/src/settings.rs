//! Hyperparameter resolution.
//!
//! Three layers, later wins: built-in defaults, a flat `key = value`
//! config file, then command-line flags. Each resolved value remembers
//! which layer set it, and every command prints the table before doing
//! any work, so a run's log carries its own provenance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use hornbeam::embedding::{ModelKind, Norm, ScoreModel};

use crate::{usage, RunArgs};

/// The documented config keys, in display order. Versioned together
/// with the manifest schema.
pub const KEYS: [&str; 16] = [
    "model",
    "dim",
    "norm",
    "lr",
    "batch",
    "neg_ratio",
    "omega",
    "beta",
    "topk",
    "iters",
    "inner_steps",
    "seed",
    "sparse_threshold",
    "sparse_mode",
    "min_hc",
    "patience",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    Config,
    Flag,
}

impl Source {
    fn label(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::Config => "config",
            Source::Flag => "flag",
        }
    }
}

/// Resolved hyperparameters. `sparse_threshold` is off rather than 0.0
/// by default: 0.0 is not a no-op (it drops triples touching the single
/// most frequent entity), so filtering only happens when asked for.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub model: String,
    pub dim: usize,
    pub norm: String,
    pub lr: f64,
    pub batch: usize,
    pub neg_ratio: usize,
    pub omega: f64,
    pub beta: f64,
    pub topk: usize,
    pub iters: usize,
    pub inner_steps: usize,
    pub seed: u64,
    pub sparse_threshold: Option<f64>,
    pub sparse_mode: String,
    pub min_hc: f64,
    pub patience: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            model: "transe".into(),
            dim: 64,
            norm: "l2".into(),
            lr: 0.1,
            batch: 256,
            neg_ratio: 1,
            omega: 0.5,
            beta: 1.0,
            topk: 100,
            iters: 10,
            inner_steps: 100,
            seed: 0,
            sparse_threshold: None,
            sparse_mode: "either".into(),
            min_hc: 0.01,
            patience: 2,
        }
    }
}

#[derive(Debug)]
pub struct Resolved {
    pub settings: Settings,
    sources: BTreeMap<&'static str, Source>,
}

pub fn resolve(args: &RunArgs) -> anyhow::Result<Resolved> {
    let mut r = Resolved {
        settings: Settings::default(),
        sources: KEYS.iter().map(|&k| (k, Source::Default)).collect(),
    };
    if let Some(path) = &args.config {
        for (line, key, value) in parse_config(path)? {
            r.set(&key, &value, Source::Config)
                .map_err(|msg| usage(format!("{}:{line}: {msg}", path.display())))?;
        }
    }
    let flags: [(&str, Option<String>); 14] = [
        ("model", args.model.clone()),
        ("dim", args.dim.map(|v| v.to_string())),
        ("norm", args.norm.clone()),
        ("lr", args.lr.map(|v| v.to_string())),
        ("batch", args.batch.map(|v| v.to_string())),
        ("neg_ratio", args.neg_ratio.map(|v| v.to_string())),
        ("omega", args.omega.map(|v| v.to_string())),
        ("beta", args.beta.map(|v| v.to_string())),
        ("topk", args.topk.map(|v| v.to_string())),
        ("iters", args.iters.map(|v| v.to_string())),
        ("inner_steps", args.inner_steps.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("sparse_threshold", args.sparse_threshold.map(|v| v.to_string())),
        ("min_hc", args.min_hc.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            r.set(key, &v, Source::Flag)
                .map_err(|msg| usage(format!("--{}: {msg}", key.replace('_', "-"))))?;
        }
    }
    Ok(r)
}

impl Resolved {
    pub fn source(&self, key: &str) -> Source {
        *self.sources.get(key).expect("key is in KEYS")
    }

    pub fn score_model(&self) -> anyhow::Result<ScoreModel> {
        Ok(ScoreModel {
            kind: ModelKind::parse(&self.settings.model)?,
            dim: self.settings.dim,
            norm: self.norm(),
        })
    }

    pub fn norm(&self) -> Norm {
        match self.settings.norm.as_str() {
            "l1" => Norm::L1,
            _ => Norm::L2,
        }
    }

    /// The provenance table printed at startup.
    pub fn table(&self) -> String {
        let mut out = String::from("settings (defaults < config < flags)\n");
        for key in KEYS {
            let _ = writeln!(out, "  {key:<17} {:<12} {}", self.value_text(key), self.source(key).label());
        }
        out
    }

    fn value_text(&self, key: &str) -> String {
        let s = &self.settings;
        match key {
            "model" => s.model.clone(),
            "dim" => s.dim.to_string(),
            "norm" => s.norm.clone(),
            "lr" => s.lr.to_string(),
            "batch" => s.batch.to_string(),
            "neg_ratio" => s.neg_ratio.to_string(),
            "omega" => s.omega.to_string(),
            "beta" => s.beta.to_string(),
            "topk" => s.topk.to_string(),
            "iters" => s.iters.to_string(),
            "inner_steps" => s.inner_steps.to_string(),
            "seed" => s.seed.to_string(),
            "sparse_threshold" => match s.sparse_threshold {
                Some(t) => t.to_string(),
                None => "off".into(),
            },
            "sparse_mode" => s.sparse_mode.clone(),
            "min_hc" => s.min_hc.to_string(),
            "patience" => s.patience.to_string(),
            other => unreachable!("unknown key {other}"),
        }
    }

    fn set(&mut self, key: &str, raw: &str, source: Source) -> Result<(), String> {
        let s = &mut self.settings;
        match key {
            "model" => {
                ModelKind::parse(raw).map_err(|_| {
                    format!("model must be one of transe, distmult, complex, rotate, bilinear; got `{raw}`")
                })?;
                s.model = raw.to_string();
            }
            "norm" => match raw {
                "l1" | "l2" => s.norm = raw.to_string(),
                _ => return Err(format!("norm must be l1 or l2, got `{raw}`")),
            },
            "dim" => s.dim = positive(key, raw)?,
            "batch" => s.batch = positive(key, raw)?,
            "neg_ratio" => s.neg_ratio = positive(key, raw)?,
            "iters" => s.iters = positive(key, raw)?,
            "inner_steps" => s.inner_steps = positive(key, raw)?,
            "patience" => s.patience = positive(key, raw)?,
            "topk" => {
                s.topk = raw
                    .parse::<usize>()
                    .map_err(|_| format!("{key} must be a nonnegative integer, got `{raw}`"))?
            }
            "seed" => {
                s.seed = raw
                    .parse::<u64>()
                    .map_err(|_| format!("{key} must be a nonnegative integer, got `{raw}`"))?
            }
            "lr" => s.lr = float(key, raw, |v| v > 0.0, "be positive")?,
            "beta" => s.beta = float(key, raw, |v| v > 0.0, "be positive")?,
            "omega" => s.omega = float(key, raw, |v| (0.0..=1.0).contains(&v), "lie in [0, 1]")?,
            "min_hc" => s.min_hc = float(key, raw, |v| v > 0.0 && v <= 1.0, "lie in (0, 1]")?,
            "sparse_threshold" => {
                s.sparse_threshold =
                    Some(float(key, raw, |v| (0.0..=1.0).contains(&v), "lie in [0, 1]")?)
            }
            "sparse_mode" => match raw {
                "either" | "both" => s.sparse_mode = raw.to_string(),
                _ => return Err(format!("sparse_mode must be either or both, got `{raw}`")),
            },
            other => {
                return Err(format!(
                    "unknown config key `{other}` (valid keys: {})",
                    KEYS.join(", ")
                ))
            }
        }
        let slot = KEYS.iter().find(|&&k| k == key).expect("validated above");
        self.sources.insert(slot, source);
        Ok(())
    }
}

fn positive(key: &str, raw: &str) -> Result<usize, String> {
    match raw.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{key} must be a positive integer, got `{raw}`")),
    }
}

fn float(key: &str, raw: &str, ok: impl Fn(f64) -> bool, want: &str) -> Result<f64, String> {
    let v = raw
        .parse::<f64>()
        .map_err(|_| format!("{key} must be a number, got `{raw}`"))?;
    if ok(v) {
        Ok(v)
    } else {
        Err(format!("{key} must {want}, got {raw}"))
    }
}

/// Reads `key = value` lines; `#` starts a comment line, blanks are
/// skipped. Returns (line number, key, value) in file order.
fn parse_config(path: &Path) -> anyhow::Result<Vec<(usize, String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config `{}`: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!("{}:{}: expected `key = value`", path.display(), i + 1))
        })?;
        out.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}
