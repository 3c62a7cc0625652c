//! Latent-factor models over entities and relations.
//!
//! Five score functions share one parameter container: a dense row-major
//! f64 matrix per table, with the row width fixed by the model kind.
//! Complex-valued models store a row as [re_0..re_{d-1}, im_0..im_{d-1}].
//! Rotation relations store d phase angles, so the unit-modulus constraint
//! holds by construction and never needs projection.

mod checkpoint;
mod score;
mod train;

pub use score::{score, score_and_grad, sigmoid, truth, ScoreGrad};
pub use train::{
    embedding_learning, gradient, loss, loss_and_gradient, negative_sample, Gradient,
    TrainConfig, TrainReport,
};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TransE,
    DistMult,
    ComplEx,
    RotatE,
    Bilinear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::TransE,
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::RotatE,
        ModelKind::Bilinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::RotatE => "rotate",
            ModelKind::Bilinear => "bilinear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            "rotate" => Ok(ModelKind::RotatE),
            "bilinear" => Ok(ModelKind::Bilinear),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Distance norm for the translation/rotation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L2,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreModel {
    pub kind: ModelKind,
    pub dim: usize,
    pub norm: Norm,
}

impl ScoreModel {
    pub fn new(kind: ModelKind, dim: usize) -> Self {
        ScoreModel { kind, dim, norm: Norm::L2 }
    }

    /// f64 slots per entity row.
    pub fn entity_width(&self) -> usize {
        match self.kind {
            ModelKind::TransE | ModelKind::DistMult | ModelKind::Bilinear => self.dim,
            ModelKind::ComplEx | ModelKind::RotatE => 2 * self.dim,
        }
    }

    /// f64 slots per relation row.
    pub fn relation_width(&self) -> usize {
        match self.kind {
            ModelKind::TransE | ModelKind::DistMult | ModelKind::RotatE => self.dim,
            ModelKind::ComplEx => 2 * self.dim,
            ModelKind::Bilinear => self.dim * self.dim,
        }
    }
}

/// Dense row-major parameter table.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Params {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Params { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "parameter table wants {rows}x{cols} = {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Params { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub model: ScoreModel,
    pub entities: Params,
    pub relations: Params,
}

impl EmbeddingState {
    /// Random initialization: every real slot uniform in [-6/sqrt(d), 6/sqrt(d)],
    /// rotation phases uniform in [-pi, pi].
    pub fn init(model: ScoreModel, n_entities: usize, n_relations: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 6.0 / (model.dim as f64).sqrt();
        let real = Uniform::new_inclusive(-bound, bound);
        let phase = Uniform::new(-std::f64::consts::PI, std::f64::consts::PI);

        let ew = model.entity_width();
        let rw = model.relation_width();
        let mut entities = Params::zeros(n_entities, ew);
        for v in &mut entities.data {
            *v = real.sample(&mut rng);
        }
        let mut relations = Params::zeros(n_relations, rw);
        let relation_is_phase = model.kind == ModelKind::RotatE;
        for v in &mut relations.data {
            *v = if relation_is_phase { phase.sample(&mut rng) } else { real.sample(&mut rng) };
        }
        EmbeddingState { model, entities, relations }
    }

    pub fn n_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.rows()
    }

    pub fn finite(&self) -> bool {
        self.entities.data.iter().all(|v| v.is_finite())
            && self.relations.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_per_model() {
        let d = 4;
        let w = |k| {
            let m = ScoreModel::new(k, d);
            (m.entity_width(), m.relation_width())
        };
        assert_eq!(w(ModelKind::TransE), (4, 4));
        assert_eq!(w(ModelKind::DistMult), (4, 4));
        assert_eq!(w(ModelKind::ComplEx), (8, 8));
        assert_eq!(w(ModelKind::RotatE), (8, 4));
        assert_eq!(w(ModelKind::Bilinear), (4, 16));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let m = ScoreModel::new(ModelKind::TransE, 16);
        let a = EmbeddingState::init(m, 10, 3, 7);
        let b = EmbeddingState::init(m, 10, 3, 7);
        let c = EmbeddingState::init(m, 10, 3, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = 6.0 / 4.0;
        assert!(a.entities.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn rotate_relations_are_phases() {
        let m = ScoreModel::new(ModelKind::RotatE, 8);
        let s = EmbeddingState::init(m, 4, 4, 1);
        assert!(s
            .relations
            .data()
            .iter()
            .all(|v| (-std::f64::consts::PI..=std::f64::consts::PI).contains(v)));
    }
}
