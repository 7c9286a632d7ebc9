//! Clipped-objective policy optimisation.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::policy::{PolicyParams, HEADS, N_LOGITS, OBS_LEN};
use super::RlError;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            lr_actor: 5e-4,
            lr_critic: 1e-3,
            epochs: 50,
            minibatch: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let ok = self.gamma > 0.0
            && self.gamma < 1.0
            && (0.0..=1.0).contains(&self.gae_lambda)
            && self.clip_eps > 0.0
            && self.lr_actor > 0.0
            && self.lr_critic > 0.0
            && self.epochs > 0
            && self.minibatch > 0
            && self.entropy_coef >= 0.0
            && self.value_coef > 0.0
            && self.max_grad_norm > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(RlError::InvalidConfig)
        }
    }
}

/// Per-sample clipped surrogate `min(ρÂ, clip(ρ, 1−ε, 1+ε)Â)`.
pub fn clipped_objective(ratio: f64, adv: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * adv).min(clipped * adv)
}

/// First- and second-moment gradient optimiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64, cfg: &PpoConfig) -> Self {
        Self { lr, beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.adam_eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let t = self.t as f64;
        let (b1, b2) = (self.beta1, self.beta2);
        let step = self.lr / (1.0 - libm::pow(b1, t));
        let c2 = 1.0 / (1.0 - libm::pow(b2, t));
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (libm::sqrt(*v * c2) + self.eps);
        }
    }
}

/// One optimisation batch with normalised observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub obs: Vec<f64>,
    pub actions: Vec<[usize; 3]>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// Negated mean clipped surrogate.
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

impl LossParts {
    pub fn total(&self, cfg: &PpoConfig) -> f64 {
        self.policy + cfg.value_coef * self.value - cfg.entropy_coef * self.entropy
    }
}

/// Loss terms and gradients with respect to actor and critic parameters.
pub fn loss_and_grad(p: &PolicyParams, b: &Batch, cfg: &PpoConfig) -> (LossParts, Vec<f64>, Vec<f64>) {
    let n = b.len();
    assert!(n > 0 && b.obs.len() == n * OBS_LEN);
    let inv = 1.0 / n as f64;
    let (logp, values, ac, cc) = p.forward_batch(&b.obs, n);
    let mut d_logits = vec![0.0; n * N_LOGITS];
    let mut d_values = vec![0.0; n];
    let mut parts = LossParts::default();
    for i in 0..n {
        let row = &logp[i * N_LOGITS..(i + 1) * N_LOGITS];
        let mut off = 0;
        let mut lp = 0.0;
        for (h, &size) in HEADS.iter().enumerate() {
            lp += row[off + b.actions[i][h]];
            off += size;
        }
        let ratio = libm::exp(lp - b.old_log_probs[i]);
        let adv = b.advantages[i];
        parts.policy -= clipped_objective(ratio, adv, cfg.clip_eps) * inv;
        if libm::fabs(ratio - 1.0) > cfg.clip_eps {
            parts.clip_fraction += inv;
        }
        let unclipped_active = if adv >= 0.0 { ratio <= 1.0 + cfg.clip_eps } else { ratio >= 1.0 - cfg.clip_eps };
        let d_lp = if unclipped_active { -ratio * adv * inv } else { 0.0 };

        let d_row = &mut d_logits[i * N_LOGITS..(i + 1) * N_LOGITS];
        let mut off = 0;
        for (h, &size) in HEADS.iter().enumerate() {
            let seg = &row[off..off + size];
            let ent: f64 = -seg.iter().map(|&l| libm::exp(l) * l).sum::<f64>();
            parts.entropy += ent * inv;
            for k in 0..size {
                let pk = libm::exp(seg[k]);
                let onehot = if k == b.actions[i][h] { 1.0 } else { 0.0 };
                d_row[off + k] = d_lp * (onehot - pk) + cfg.entropy_coef * inv * pk * (seg[k] + ent);
            }
            off += size;
        }

        let err = values[i] - b.returns[i];
        parts.value += err * err * inv;
        d_values[i] = cfg.value_coef * 2.0 * err * inv;
    }
    let mut ga = vec![0.0; p.actor.params.len()];
    let mut gc = vec![0.0; p.critic.params.len()];
    p.actor.backward(&ac, &d_logits, &mut ga);
    p.critic.backward(&cc, &d_values, &mut gc);
    (parts, ga, gc)
}

fn clip_norm(g: &mut [f64], max: f64) {
    let norm = libm::sqrt(g.iter().map(|x| x * x).sum());
    if norm > max {
        let s = max / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Mean loss statistics over every minibatch of an update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Policy parameters plus optimiser state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub params: PolicyParams,
    pub cfg: PpoConfig,
    actor_opt: Adam,
    critic_opt: Adam,
}

impl Learner {
    pub fn new(params: PolicyParams, cfg: PpoConfig) -> Self {
        let actor_opt = Adam::new(params.actor.params.len(), cfg.lr_actor, &cfg);
        let critic_opt = Adam::new(params.critic.params.len(), cfg.lr_critic, &cfg);
        Self { params, cfg, actor_opt, critic_opt }
    }

    /// Runs `epochs` passes of shuffled minibatches over `buf`, then clears it.
    /// On a non-finite loss or gradient the parameters and optimiser state are
    /// restored and the buffer is kept.
    pub fn update(&mut self, buf: &mut RolloutBuffer, rng: &mut Rng) -> Result<UpdateStats, RlError> {
        if buf.is_empty() {
            return Err(RlError::EmptyBuffer);
        }
        if !buf.has_advantages() {
            return Err(RlError::MissingAdvantages);
        }
        let n = buf.len();
        let mean = buf.advantages.iter().sum::<f64>() / n as f64;
        let var = buf.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = libm::sqrt(var) + 1e-8;
        let norm_adv: Vec<f64> = buf.advantages.iter().map(|a| (a - mean) / std).collect();

        let snapshot = (self.params.clone(), self.actor_opt.clone(), self.critic_opt.clone());
        let mut idx: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats::default();
        let mut batch = Batch::default();
        for _ in 0..self.cfg.epochs {
            idx.shuffle(rng);
            for chunk in idx.chunks(self.cfg.minibatch) {
                batch.obs.clear();
                batch.actions.clear();
                batch.old_log_probs.clear();
                batch.advantages.clear();
                batch.returns.clear();
                for &i in chunk {
                    let s = &buf.steps[i];
                    batch.obs.extend_from_slice(&s.obs);
                    batch.actions.push(s.action.indices());
                    batch.old_log_probs.push(s.log_prob);
                    batch.advantages.push(norm_adv[i]);
                    batch.returns.push(buf.returns[i]);
                }
                let (parts, mut ga, mut gc) = loss_and_grad(&self.params, &batch, &self.cfg);
                let finite = parts.total(&self.cfg).is_finite() && ga.iter().all(|g| g.is_finite()) && gc.iter().all(|g| g.is_finite());
                if !finite {
                    (self.params, self.actor_opt, self.critic_opt) = snapshot;
                    return Err(RlError::NonFiniteLoss);
                }
                clip_norm(&mut ga, self.cfg.max_grad_norm);
                clip_norm(&mut gc, self.cfg.max_grad_norm);
                self.actor_opt.step(&mut self.params.actor.params, &ga);
                self.critic_opt.step(&mut self.params.critic.params, &gc);
                stats.policy_loss += parts.policy;
                stats.value_loss += parts.value;
                stats.entropy += parts.entropy;
                stats.clip_fraction += parts.clip_fraction;
                stats.minibatches += 1;
            }
        }
        if !self.params.is_finite() {
            (self.params, self.actor_opt, self.critic_opt) = snapshot;
            return Err(RlError::NonFiniteLoss);
        }
        let k = stats.minibatches as f64;
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.clip_fraction /= k;
        buf.clear();
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::ActionTriple;
    use crate::rng::rng;
    use rand::Rng as _;

    #[test]
    fn clip_examples() {
        assert!((clipped_objective(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn ratio_is_one_right_after_collection() {
        let p = PolicyParams::new(&[16, 8], 4);
        let mut r = rng(1);
        let mut buf = RolloutBuffer::new();
        let cfg = PpoConfig::default();
        for i in 0..20 {
            let mut rows = [[0.0; 4]; 5];
            rows[0] = [r.gen_range(-20.0..20.0), r.gen_range(-5.0..5.0), 6.0, 0.1 * i as f64];
            let o = crate::sim::ObservationMatrix { rows };
            let d = p.forward_one(&o).unwrap();
            let a = d.sample(&mut r);
            buf.push(&o, a, d.log_prob(&a), 1.0, d.value);
        }
        buf.compute_gae(cfg.gamma, cfg.gae_lambda);
        let batch = Batch {
            obs: buf.steps.iter().flat_map(|s| s.obs).collect(),
            actions: buf.steps.iter().map(|s| s.action.indices()).collect(),
            old_log_probs: buf.steps.iter().map(|s| s.log_prob).collect(),
            advantages: buf.advantages.clone(),
            returns: buf.returns.clone(),
        };
        let dists = p.forward_normalized(&batch.obs, batch.len());
        for (i, d) in dists.iter().enumerate() {
            let a = ActionTriple::new(batch.actions[i][0], batch.actions[i][1], batch.actions[i][2]).unwrap();
            let ratio = (d.log_prob(&a) - batch.old_log_probs[i]).exp();
            assert!((ratio - 1.0).abs() < 1e-12);
            let adv = batch.advantages[i];
            assert!((clipped_objective(ratio, adv, 0.2) - ratio * adv).abs() < 1e-12);
        }
        let (parts, _, _) = loss_and_grad(&p, &batch, &cfg);
        assert_eq!(parts.clip_fraction, 0.0);
    }

    #[test]
    fn update_requires_advantages_and_clears_buffer() {
        let mut l = Learner::new(PolicyParams::new(&[8], 2), PpoConfig { epochs: 2, ..PpoConfig::default() });
        let mut r = rng(0);
        let mut buf = RolloutBuffer::new();
        assert_eq!(l.update(&mut buf, &mut r), Err(RlError::EmptyBuffer));
        let o = crate::sim::ObservationMatrix { rows: [[1.0; 4]; 5] };
        buf.push(&o, ActionTriple::new(0, 0, 0).unwrap(), -3.0, 1.0, 0.0);
        buf.finish_terminal();
        assert_eq!(l.update(&mut buf, &mut r), Err(RlError::MissingAdvantages));
        buf.compute_gae(0.99, 0.95);
        l.update(&mut buf, &mut r).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn non_finite_loss_restores_params() {
        let mut l = Learner::new(PolicyParams::new(&[8], 2), PpoConfig::default());
        let before = l.clone();
        let mut r = rng(0);
        let mut buf = RolloutBuffer::new();
        let o = crate::sim::ObservationMatrix { rows: [[1.0; 4]; 5] };
        buf.push(&o, ActionTriple::new(0, 0, 0).unwrap(), -3.0, f64::INFINITY, 0.0);
        buf.push(&o, ActionTriple::new(1, 0, 0).unwrap(), -3.0, 0.0, 0.0);
        buf.compute_gae(0.99, 0.95);
        assert_eq!(l.update(&mut buf, &mut r), Err(RlError::NonFiniteLoss));
        assert_eq!(l, before);
        assert_eq!(buf.len(), 2);
    }
}
