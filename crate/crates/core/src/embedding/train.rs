//! Cross-entropy training with uniform negative sampling.
//!
//! The optimizer is plain minibatch SGD with a fixed learning rate. Each
//! inner step draws one minibatch of positives from a shuffled epoch
//! permutation, attaches `negatives` corrupted copies per positive, and
//! applies the exact analytic gradient of the mean cross-entropy.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{score_and_grad, sigmoid, EmbeddingState};
use crate::error::{Error, Result};
use crate::kg::{EntityId, LabeledTriple, Triple};

const LOG_CLAMP: f64 = 1e-12;
const CORRUPT_RETRIES: usize = 1000;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Corrupted copies per positive.
    pub negatives: usize,
    /// Inner SGD steps per call.
    pub steps: usize,
    pub seed: u64,
    /// When false, negatives are drawn once up front and reused for every
    /// step of this call instead of being resampled per step.
    pub resample_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            batch_size: 256,
            negatives: 1,
            steps: 100,
            seed: 0,
            resample_negatives: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("negatives per positive must be positive".into()));
        }
        Ok(())
    }
}

/// Mean cross-entropy between sigma(phi) and the binary labels.
pub fn loss(state: &EmbeddingState, batch: &[LabeledTriple]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("loss of an empty batch is undefined".into()));
    }
    let mut acc = 0.0;
    for ex in batch {
        let xi = sigmoid(super::score(state, ex.triple)).clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        acc -= ex.label() * xi.ln() + (1.0 - ex.label()) * (1.0 - xi).ln();
    }
    Ok(acc / batch.len() as f64)
}

/// Sparse gradient: only rows touched by the batch appear.
#[derive(Debug, Default, Clone)]
pub struct Gradient {
    pub entities: HashMap<u32, Vec<f64>>,
    pub relations: HashMap<u32, Vec<f64>>,
}

impl Gradient {
    fn add(map: &mut HashMap<u32, Vec<f64>>, row: u32, scale: f64, delta: &[f64]) {
        let slot = map.entry(row).or_insert_with(|| vec![0.0; delta.len()]);
        for (s, d) in slot.iter_mut().zip(delta) {
            *s += scale * d;
        }
    }
}

/// Analytic gradient of `loss` over the batch. dL/dphi = (xi - y) / n,
/// chained through each model's score gradient.
pub fn loss_and_gradient(state: &EmbeddingState, batch: &[LabeledTriple]) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::Config("gradient of an empty batch is undefined".into()));
    }
    let n = batch.len() as f64;
    let mut grad = Gradient::default();
    let mut total = 0.0;
    for ex in batch {
        let sg = score_and_grad(state, ex.triple);
        let xi = sigmoid(sg.phi);
        let clamped = xi.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        total -= ex.label() * clamped.ln() + (1.0 - ex.label()) * (1.0 - clamped).ln();
        let g = (xi - ex.label()) / n;
        Gradient::add(&mut grad.entities, ex.triple.head.0, g, &sg.d_head);
        Gradient::add(&mut grad.relations, ex.triple.relation.0, g, &sg.d_rel);
        Gradient::add(&mut grad.entities, ex.triple.tail.0, g, &sg.d_tail);
    }
    Ok((total / n, grad))
}

pub fn gradient(state: &EmbeddingState, batch: &[LabeledTriple]) -> Result<Gradient> {
    loss_and_gradient(state, batch).map(|(_, g)| g)
}

/// Corrupts head or tail (fair coin) with a uniform entity, rejecting
/// corruptions that land back in the positive set.
pub fn negative_sample(
    positive: &HashSet<Triple>,
    n_entities: usize,
    batch: &[Triple],
    ratio: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LabeledTriple>> {
    let mut out = Vec::with_capacity(batch.len() * ratio);
    for &t in batch {
        for _ in 0..ratio {
            out.push(LabeledTriple::negative(corrupt(positive, n_entities, t, rng)?));
        }
    }
    Ok(out)
}

fn corrupt(
    positive: &HashSet<Triple>,
    n_entities: usize,
    t: Triple,
    rng: &mut impl Rng,
) -> Result<Triple> {
    for _ in 0..CORRUPT_RETRIES {
        let e = EntityId(rng.gen_range(0..n_entities as u32));
        let cand = if rng.gen_bool(0.5) {
            Triple::new(e, t.relation, t.tail)
        } else {
            Triple::new(t.head, t.relation, e)
        };
        if !positive.contains(&cand) {
            return Ok(cand);
        }
    }
    Err(Error::Sampling(format!(
        "no negative found for ({}, {}, {}) after {CORRUPT_RETRIES} corruptions",
        t.head, t.relation, t.tail
    )))
}

#[derive(Debug, Clone, Copy)]
pub struct TrainReport {
    /// Mean step loss over the first epoch's worth of steps.
    pub initial_loss: f64,
    /// Mean step loss over the last epoch's worth of steps.
    pub final_loss: f64,
    pub steps_run: usize,
}

/// Runs `cfg.steps` minibatch SGD steps over the positives, mutating the
/// state in place. The positive set doubles as the rejection filter for
/// corruption, so inferred positives are never re-drawn as negatives.
pub fn embedding_learning(
    state: &mut EmbeddingState,
    positives: &[Triple],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if positives.is_empty() {
        return Err(Error::Config("cannot train on an empty positive set".into()));
    }
    let n_entities = state.n_entities();
    let pool: HashSet<Triple> = positives.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Fixed-negative mode draws the whole corruption table up front.
    let fixed: Option<Vec<Vec<Triple>>> = if cfg.resample_negatives {
        None
    } else {
        let mut table = Vec::with_capacity(positives.len());
        for &p in positives {
            let negs: Result<Vec<Triple>> =
                (0..cfg.negatives).map(|_| corrupt(&pool, n_entities, p, &mut rng)).collect();
            table.push(negs?);
        }
        Some(table)
    };

    let mut order: Vec<usize> = (0..positives.len()).collect();
    let mut cursor = order.len(); // forces a shuffle before the first step
    let epoch_steps = positives.len().div_ceil(cfg.batch_size);
    let mut step_losses = Vec::with_capacity(cfg.steps);
    let mut batch = Vec::new();

    for step in 0..cfg.steps {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let take = cfg.batch_size.min(order.len() - cursor);
        batch.clear();
        for &idx in &order[cursor..cursor + take] {
            let p = positives[idx];
            batch.push(LabeledTriple::positive(p));
            match &fixed {
                Some(table) => {
                    batch.extend(table[idx].iter().map(|&n| LabeledTriple::negative(n)))
                }
                None => {
                    for _ in 0..cfg.negatives {
                        batch.push(LabeledTriple::negative(corrupt(
                            &pool, n_entities, p, &mut rng,
                        )?));
                    }
                }
            }
        }
        cursor += take;

        let (step_loss, grad) = loss_and_gradient(state, &batch)?;
        step_losses.push(step_loss);
        apply(state, &grad, cfg.learning_rate, step)?;
    }

    let span = epoch_steps.min(step_losses.len()).max(1);
    let initial = mean(&step_losses[..span.min(step_losses.len())]);
    let final_ = mean(&step_losses[step_losses.len().saturating_sub(span)..]);
    Ok(TrainReport { initial_loss: initial, final_loss: final_, steps_run: cfg.steps })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// SGD update restricted to the touched rows, with a finiteness check so a
/// diverging run fails loudly instead of poisoning later phases.
fn apply(state: &mut EmbeddingState, grad: &Gradient, lr: f64, step: usize) -> Result<()> {
    for (&row, delta) in &grad.entities {
        let slot = state.entities.row_mut(row as usize);
        for (s, d) in slot.iter_mut().zip(delta) {
            *s -= lr * d;
        }
        if slot.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite entity parameters (row {row}) after step {step}"
            )));
        }
    }
    for (&row, delta) in &grad.relations {
        let slot = state.relations.row_mut(row as usize);
        for (s, d) in slot.iter_mut().zip(delta) {
            *s -= lr * d;
        }
        if slot.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite relation parameters (row {row}) after step {step}"
            )));
        }
    }
    Ok(())
}
