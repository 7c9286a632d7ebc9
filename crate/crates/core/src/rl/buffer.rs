//! Rollout storage and generalised advantage estimation.

use alloc::vec::Vec;

use super::policy::{normalize, OBS_LEN};
use crate::executor::ActionTriple;
use crate::sim::ObservationMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Normalised observation.
    pub obs: [f64; OBS_LEN],
    pub action: ActionTriple,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// True when this step ended its episode for good (success or collision).
    pub done: bool,
    /// Value of the following state when the episode was cut short, used as
    /// bootstrap instead of the next record's value.
    pub bootstrap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub steps: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: &ObservationMatrix, action: ActionTriple, log_prob: f64, reward: f64, value: f64) {
        self.steps.push(Transition { obs: normalize(obs), action, log_prob, reward, value, done: false, bootstrap: None });
        self.advantages.clear();
        self.returns.clear();
    }

    /// Marks the last step as terminal.
    pub fn finish_terminal(&mut self) {
        if let Some(t) = self.steps.last_mut() {
            t.done = true;
            t.bootstrap = None;
        }
    }

    /// Marks the last step as truncated with the value estimate of the state after it.
    pub fn finish_truncated(&mut self, next_value: f64) {
        if let Some(t) = self.steps.last_mut() {
            t.done = false;
            t.bootstrap = Some(next_value);
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn has_advantages(&self) -> bool {
        !self.steps.is_empty() && self.advantages.len() == self.steps.len()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.advantages.clear();
        self.returns.clear();
    }

    /// Fills `advantages` and `returns`. A step that is neither terminal nor
    /// truncated bootstraps from the next step's value; the final step of the
    /// buffer without a bootstrap is treated as terminal.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) {
        let (adv, ret) = gae(&self.steps, gamma, lambda);
        self.advantages = adv;
        self.returns = ret;
    }
}

pub fn gae(steps: &[Transition], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = steps.len();
    let mut adv = alloc::vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let s = &steps[t];
        let (next_value, cont) = if s.done {
            (0.0, 0.0)
        } else if let Some(b) = s.bootstrap {
            (b, 0.0)
        } else if t + 1 < n {
            (steps[t + 1].value, 1.0)
        } else {
            (0.0, 0.0)
        };
        let delta = s.reward + gamma * next_value - s.value;
        adv[t] = delta + gamma * lambda * cont * next_adv;
        next_adv = adv[t];
    }
    let ret = adv.iter().zip(steps).map(|(a, s)| a + s.value).collect();
    (adv, ret)
}
