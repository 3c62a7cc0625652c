//! Score functions and their analytic gradients.
//!
//! Conventions: higher score = more plausible. Distance models negate the
//! norm. Zero-distance configurations use the zero subgradient.

use super::{EmbeddingState, ModelKind, Norm};
use crate::kg::Triple;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Plausibility score of a triple under the current parameters.
pub fn score(state: &EmbeddingState, t: Triple) -> f64 {
    let h = state.entities.row(t.head.index());
    let r = state.relations.row(t.relation.index());
    let tl = state.entities.row(t.tail.index());
    let d = state.model.dim;
    match state.model.kind {
        ModelKind::TransE => {
            let norm = match state.model.norm {
                Norm::L2 => (0..d).map(|i| (h[i] + r[i] - tl[i]).powi(2)).sum::<f64>().sqrt(),
                Norm::L1 => (0..d).map(|i| (h[i] + r[i] - tl[i]).abs()).sum(),
            };
            -norm
        }
        ModelKind::DistMult => (0..d).map(|i| h[i] * r[i] * tl[i]).sum(),
        ModelKind::ComplEx => {
            // Re <h, r, conj(t)> with rows split [re | im].
            let mut acc = 0.0;
            for i in 0..d {
                let (a, b) = (h[i], h[d + i]);
                let (c, dd) = (r[i], r[d + i]);
                let (e, f) = (tl[i], tl[d + i]);
                acc += a * c * e + b * dd * e + b * c * f - a * dd * f;
            }
            acc
        }
        ModelKind::RotatE => -rotate_distance(h, r, tl, d, state.model.norm).0,
        ModelKind::Bilinear => {
            let mut acc = 0.0;
            for i in 0..d {
                let mut row = 0.0;
                for j in 0..d {
                    row += r[i * d + j] * tl[j];
                }
                acc += h[i] * row;
            }
            acc
        }
    }
}

/// Truth value xi = sigma(phi), strictly inside (0,1) for finite scores.
pub fn truth(state: &EmbeddingState, t: Triple) -> f64 {
    sigmoid(score(state, t))
}

/// ||h o r - t|| for phase-encoded rotations, plus the residual needed by
/// the gradient: residuals (u_i, v_i) per component.
fn rotate_distance(h: &[f64], phases: &[f64], t: &[f64], d: usize, norm: Norm) -> (f64, Vec<(f64, f64)>) {
    let mut res = Vec::with_capacity(d);
    let mut acc = 0.0;
    for i in 0..d {
        let (cos, sin) = (phases[i].cos(), phases[i].sin());
        let u = h[i] * cos - h[d + i] * sin - t[i];
        let v = h[i] * sin + h[d + i] * cos - t[d + i];
        res.push((u, v));
        match norm {
            Norm::L2 => acc += u * u + v * v,
            Norm::L1 => acc += (u * u + v * v).sqrt(),
        }
    }
    let dist = match norm {
        Norm::L2 => acc.sqrt(),
        Norm::L1 => acc,
    };
    (dist, res)
}

/// Partial derivatives of `score` w.r.t. the three touched rows.
#[derive(Debug, Clone)]
pub struct ScoreGrad {
    pub phi: f64,
    pub d_head: Vec<f64>,
    pub d_rel: Vec<f64>,
    pub d_tail: Vec<f64>,
}

pub fn score_and_grad(state: &EmbeddingState, t: Triple) -> ScoreGrad {
    let h = state.entities.row(t.head.index());
    let r = state.relations.row(t.relation.index());
    let tl = state.entities.row(t.tail.index());
    let d = state.model.dim;
    match state.model.kind {
        ModelKind::TransE => {
            let delta: Vec<f64> = (0..d).map(|i| h[i] + r[i] - tl[i]).collect();
            match state.model.norm {
                Norm::L2 => {
                    let n = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let scale = if n > 0.0 { 1.0 / n } else { 0.0 };
                    let dh: Vec<f64> = delta.iter().map(|x| -x * scale).collect();
                    let dt: Vec<f64> = delta.iter().map(|x| x * scale).collect();
                    ScoreGrad { phi: -n, d_head: dh.clone(), d_rel: dh, d_tail: dt }
                }
                Norm::L1 => {
                    let n = delta.iter().map(|x| x.abs()).sum::<f64>();
                    let dh: Vec<f64> = delta.iter().map(|x| -sign(*x)).collect();
                    let dt: Vec<f64> = delta.iter().map(|x| sign(*x)).collect();
                    ScoreGrad { phi: -n, d_head: dh.clone(), d_rel: dh, d_tail: dt }
                }
            }
        }
        ModelKind::DistMult => {
            let phi = (0..d).map(|i| h[i] * r[i] * tl[i]).sum();
            ScoreGrad {
                phi,
                d_head: (0..d).map(|i| r[i] * tl[i]).collect(),
                d_rel: (0..d).map(|i| h[i] * tl[i]).collect(),
                d_tail: (0..d).map(|i| h[i] * r[i]).collect(),
            }
        }
        ModelKind::ComplEx => {
            let mut phi = 0.0;
            let mut dh = vec![0.0; 2 * d];
            let mut dr = vec![0.0; 2 * d];
            let mut dt = vec![0.0; 2 * d];
            for i in 0..d {
                let (a, b) = (h[i], h[d + i]);
                let (c, dd) = (r[i], r[d + i]);
                let (e, f) = (tl[i], tl[d + i]);
                phi += a * c * e + b * dd * e + b * c * f - a * dd * f;
                dh[i] = c * e - dd * f;
                dh[d + i] = dd * e + c * f;
                dr[i] = a * e + b * f;
                dr[d + i] = b * e - a * f;
                dt[i] = a * c + b * dd;
                dt[d + i] = b * c - a * dd;
            }
            ScoreGrad { phi, d_head: dh, d_rel: dr, d_tail: dt }
        }
        ModelKind::RotatE => {
            let (dist, res) = rotate_distance(h, r, tl, d, state.model.norm);
            let mut dh = vec![0.0; 2 * d];
            let mut dr = vec![0.0; d];
            let mut dt = vec![0.0; 2 * d];
            for i in 0..d {
                let (u, v) = res[i];
                // d(dist)/d(u_i) per norm; L1 differentiates each modulus.
                let (du, dv) = match state.model.norm {
                    Norm::L2 => {
                        if dist > 0.0 {
                            (u / dist, v / dist)
                        } else {
                            (0.0, 0.0)
                        }
                    }
                    Norm::L1 => {
                        let m = (u * u + v * v).sqrt();
                        if m > 0.0 {
                            (u / m, v / m)
                        } else {
                            (0.0, 0.0)
                        }
                    }
                };
                let (cos, sin) = (r[i].cos(), r[i].sin());
                // phi = -dist, so every partial flips sign.
                dh[i] = -(du * cos + dv * sin);
                dh[d + i] = -(-du * sin + dv * cos);
                dt[i] = du;
                dt[d + i] = dv;
                let u_theta = -h[i] * sin - h[d + i] * cos;
                let v_theta = h[i] * cos - h[d + i] * sin;
                dr[i] = -(du * u_theta + dv * v_theta);
            }
            ScoreGrad { phi: -dist, d_head: dh, d_rel: dr, d_tail: dt }
        }
        ModelKind::Bilinear => {
            let mut phi = 0.0;
            let mut dh = vec![0.0; d];
            let mut dt = vec![0.0; d];
            let mut dm = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let m = r[i * d + j];
                    phi += h[i] * m * tl[j];
                    dh[i] += m * tl[j];
                    dt[j] += h[i] * m;
                    dm[i * d + j] = h[i] * tl[j];
                }
            }
            ScoreGrad { phi, d_head: dh, d_rel: dm, d_tail: dt }
        }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{Params, ScoreModel};
    use crate::kg::{EntityId, RelationId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tri(h: u32, r: u32, t: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(r), EntityId(t))
    }

    fn state_with(kind: ModelKind, dim: usize, ents: Vec<f64>, rels: Vec<f64>) -> EmbeddingState {
        let model = ScoreModel::new(kind, dim);
        let ew = model.entity_width();
        let rw = model.relation_width();
        let n_e = ents.len() / ew;
        let n_r = rels.len() / rw;
        EmbeddingState {
            model,
            entities: Params::from_data(n_e, ew, ents).unwrap(),
            relations: Params::from_data(n_r, rw, rels).unwrap(),
        }
    }

    #[test]
    fn transe_identity_translation_is_max() {
        let s = state_with(ModelKind::TransE, 2, vec![0.3, -0.4, 0.3, -0.4], vec![0.0, 0.0]);
        assert_eq!(score(&s, tri(0, 0, 1)), 0.0);
    }

    #[test]
    fn bilinear_worked_examples() {
        let m_r = vec![0.1, 0.9, 0.1, 0.1];
        let s = state_with(
            ModelKind::Bilinear,
            2,
            vec![0.9, 0.1, 0.2, 0.9, 0.3, 0.1],
            m_r,
        );
        let phi = score(&s, tri(0, 0, 1));
        assert!((phi - 0.758).abs() < 1e-12, "phi = {phi}");
        let phi2 = score(&s, tri(2, 0, 1));
        assert!((phi2 - 0.26).abs() < 1e-12, "phi2 = {phi2}");
        assert!((truth(&s, tri(0, 0, 1)) - 0.680_919_6).abs() < 1e-6);
    }

    #[test]
    fn distmult_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let ents: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rels: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = state_with(ModelKind::DistMult, 4, ents, rels);
            let a = score(&s, tri(0, 0, 1));
            let b = score(&s, tri(1, 0, 0));
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_with_zero_imaginary_matches_distmult() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 3;
        let re_e: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let re_r: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut ce = Vec::new();
        for row in re_e.chunks(d) {
            ce.extend_from_slice(row);
            ce.extend(std::iter::repeat(0.0).take(d));
        }
        let mut cr = re_r.clone();
        cr.extend(std::iter::repeat(0.0).take(d));
        let cx = state_with(ModelKind::ComplEx, d, ce, cr);
        let dm = state_with(ModelKind::DistMult, d, re_e, re_r);
        let a = score(&cx, tri(0, 0, 1));
        let b = score(&dm, tri(0, 0, 1));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rotate_zero_phase_is_translation_free_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 3;
        let ents: Vec<f64> = (0..4 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = state_with(ModelKind::RotatE, d, ents.clone(), vec![0.0; d]);
        let phi = score(&s, tri(0, 0, 1));
        let h = &ents[0..2 * d];
        let t = &ents[2 * d..4 * d];
        let expect: f64 = -(0..2 * d).map(|i| (h[i] - t[i]).powi(2)).sum::<f64>().sqrt();
        assert!((phi - expect).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_stable_and_centered() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!(sigmoid(-700.0) >= 0.0);
        assert!((sigmoid(0.758) - 0.680_919_6).abs() < 1e-6);
    }
}
