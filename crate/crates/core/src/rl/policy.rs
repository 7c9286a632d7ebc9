//! Actor-critic policy over the 5×5×3 multi-discrete action space.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mlp::{Cache, Mlp};
use super::RlError;
use crate::executor::{ActionTriple, N_LANE_CHOICES, N_SPEED_CHOICES, N_WAYPOINT_CHOICES};
use crate::rng::Rng;
use crate::sim::ObservationMatrix;

pub const HEADS: [usize; 3] = [N_WAYPOINT_CHOICES, N_SPEED_CHOICES, N_LANE_CHOICES];
pub const N_LOGITS: usize = N_WAYPOINT_CHOICES + N_SPEED_CHOICES + N_LANE_CHOICES;
pub const OBS_LEN: usize = ObservationMatrix::LEN;

const POS_SCALE: f64 = 50.0;
const SPEED_SCALE: f64 = 20.0;
const OBS_CLAMP: f64 = 5.0;

/// Row-major flattening with fixed per-column scales, clamped to ±5.
pub fn normalize(obs: &ObservationMatrix) -> [f64; OBS_LEN] {
    let mut out = obs.flatten();
    for (i, v) in out.iter_mut().enumerate() {
        let scale = match i % 4 {
            0 | 1 => POS_SCALE,
            2 => SPEED_SCALE,
            _ => PI,
        };
        *v = (*v / scale).clamp(-OBS_CLAMP, OBS_CLAMP);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

/// One sample's three head distributions and value.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadDists {
    pub probs: [Vec<f64>; 3],
    pub value: f64,
}

impl HeadDists {
    pub fn log_prob(&self, a: &ActionTriple) -> f64 {
        a.indices().iter().zip(&self.probs).map(|(&i, p)| libm::log(p[i])).sum()
    }

    pub fn entropy(&self) -> f64 {
        self.probs.iter().map(|p| entropy(p)).sum()
    }

    /// Mode of each head, lowest index on ties.
    pub fn greedy(&self) -> ActionTriple {
        let argmax = |p: &[f64]| {
            let mut best = 0;
            for (i, &v) in p.iter().enumerate() {
                if v > p[best] {
                    best = i;
                }
            }
            best
        };
        ActionTriple::new(argmax(&self.probs[0]), argmax(&self.probs[1]), argmax(&self.probs[2]))
            .expect("head sizes match the action space")
    }

    pub fn sample(&self, rng: &mut Rng) -> ActionTriple {
        let draw = |p: &[f64], rng: &mut Rng| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, &v) in p.iter().enumerate() {
                acc += v;
                if u < acc {
                    return i;
                }
            }
            p.len() - 1
        };
        let w = draw(&self.probs[0], rng);
        let s = draw(&self.probs[1], rng);
        let l = draw(&self.probs[2], rng);
        ActionTriple::new(w, s, l).expect("head sizes match the action space")
    }
}

pub(crate) fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * libm::log(v)).sum::<f64>()
}

/// In-place log-softmax of each head segment of a logits row.
pub(crate) fn log_softmax_heads(row: &mut [f64]) {
    let mut off = 0;
    for h in HEADS {
        let seg = &mut row[off..off + h];
        let m = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = seg.iter().map(|v| libm::exp(v - m)).sum();
        let lz = m + libm::log(z);
        for v in seg.iter_mut() {
            *v -= lz;
        }
        off += h;
    }
}

impl PolicyParams {
    pub fn new(hidden: &[usize], seed: u64) -> Self {
        let mut rng = crate::rng::rng(seed);
        let sizes = |out: usize| {
            let mut s = vec![OBS_LEN];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        Self { actor: Mlp::init(&sizes(N_LOGITS), 0.01, &mut rng), critic: Mlp::init(&sizes(1), 1.0, &mut rng) }
    }

    /// All weights zero: uniform heads, zero value.
    pub fn zeros(hidden: &[usize]) -> Self {
        let mut p = Self::new(hidden, 0);
        p.actor.params.iter_mut().for_each(|w| *w = 0.0);
        p.critic.params.iter_mut().for_each(|w| *w = 0.0);
        p
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite()
    }

    /// Batched forward on normalised inputs: per-sample log-probabilities
    /// (B × 13, head-wise log-softmax), values (B) and the caches for backprop.
    pub(crate) fn forward_batch(&self, x: &[f64], batch: usize) -> (Vec<f64>, Vec<f64>, Cache, Cache) {
        let ac = self.actor.forward(x, batch);
        let cc = self.critic.forward(x, batch);
        let mut logp = ac.output().to_vec();
        for row in logp.chunks_exact_mut(N_LOGITS) {
            log_softmax_heads(row);
        }
        let values = cc.output().to_vec();
        (logp, values, ac, cc)
    }

    /// Head distributions and value for each observation.
    pub fn forward(&self, obs: &[ObservationMatrix]) -> Result<Vec<HeadDists>, RlError> {
        if !self.is_finite() {
            return Err(RlError::NonFiniteParams);
        }
        let x: Vec<f64> = obs.iter().flat_map(|o| normalize(o)).collect();
        Ok(self.forward_normalized(&x, obs.len()))
    }

    pub fn forward_one(&self, obs: &ObservationMatrix) -> Result<HeadDists, RlError> {
        Ok(self.forward(core::slice::from_ref(obs))?.pop().expect("one output"))
    }

    pub(crate) fn forward_normalized(&self, x: &[f64], batch: usize) -> Vec<HeadDists> {
        let (logp, values, _, _) = self.forward_batch(x, batch);
        logp.chunks_exact(N_LOGITS)
            .zip(values)
            .map(|(row, value)| {
                let exp = |s: &[f64]| s.iter().map(|v| libm::exp(*v)).collect::<Vec<_>>();
                HeadDists { probs: [exp(&row[..5]), exp(&row[5..10]), exp(&row[10..])], value }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SENTINEL_ROW;

    fn obs(seed: f64) -> ObservationMatrix {
        let mut rows = [SENTINEL_ROW; 5];
        rows[0] = [seed, -2.0 * seed, 5.0, 0.3];
        ObservationMatrix { rows }
    }

    #[test]
    fn zero_weights_give_uniform_heads() {
        let p = PolicyParams::zeros(&[256, 128]);
        let d = p.forward_one(&obs(1.0)).unwrap();
        for v in &d.probs[0] {
            assert!((v - 0.2).abs() < 1e-15);
        }
        for v in &d.probs[2] {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn shapes_and_simplex() {
        let p = PolicyParams::new(&[256, 128], 9);
        let batch: Vec<_> = (0..7).map(|i| obs(i as f64)).collect();
        let out = p.forward(&batch).unwrap();
        assert_eq!(out.len(), 7);
        for d in &out {
            assert_eq!([d.probs[0].len(), d.probs[1].len(), d.probs[2].len()], HEADS);
            for h in &d.probs {
                assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
            let a = ActionTriple::new(1, 2, 0).unwrap();
            let joint = d.probs[0][1].ln() + d.probs[1][2].ln() + d.probs[2][0].ln();
            assert!((d.log_prob(&a) - joint).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_params_rejected() {
        let mut p = PolicyParams::new(&[4], 1);
        p.actor.params[0] = f64::NAN;
        assert_eq!(p.forward_one(&obs(0.0)), Err(RlError::NonFiniteParams));
    }

    #[test]
    fn normalisation_clamps_sentinels() {
        let n = normalize(&obs(0.0));
        assert_eq!(n[4], OBS_CLAMP);
        assert_eq!(n[2], 5.0 / SPEED_SCALE);
    }
}
