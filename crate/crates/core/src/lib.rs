//! Joint embedding and rule learning over knowledge graphs.
//!
//! The crate couples two link predictors that supervise each other: a
//! latent-factor embedding scores candidate facts, and a Horn-rule miner
//! searches for closed logical rules. Rule quality blends observed
//! confidence with embedding confidence; rule inferences are sampled back
//! into embedding training as extra positives.

pub mod error;
pub mod eval;
pub mod hybrid;
pub mod kg;
pub mod rules;
pub mod seed;
pub mod synth;

pub mod embedding;

pub use error::{Error, Result};
pub use kg::{Dictionary, EntityId, KnowledgeGraph, LabeledTriple, RelationId, Triple};
