//! Scripted surrounding-vehicle behaviour: longitudinal car-following on a
//! fixed path, parametrised by driving style.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Aggressive,
    Normal,
    Cautious,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Aggressive, Style::Normal, Style::Cautious];

    pub fn params(self) -> IdmParams {
        match self {
            Style::Aggressive => {
                IdmParams { time_headway: 0.8, max_accel: 2.5, comfort_decel: 3.0, min_gap: 1.5, speed_factor: 1.1, lateral_awareness: 1.2 }
            }
            Style::Normal => {
                IdmParams { time_headway: 1.4, max_accel: 1.5, comfort_decel: 2.0, min_gap: 2.0, speed_factor: 1.0, lateral_awareness: 2.0 }
            }
            Style::Cautious => {
                IdmParams { time_headway: 2.0, max_accel: 1.0, comfort_decel: 1.5, min_gap: 3.0, speed_factor: 0.9, lateral_awareness: 2.6 }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    /// Multiplier applied to the speed mode's desired speed.
    pub speed_factor: f64,
    /// Lateral distance within which another vehicle on the path counts as a leader.
    pub lateral_awareness: f64,
}

/// Hard braking limit for scripted vehicles, m/s^2.
pub const MAX_BRAKE: f64 = 8.0;

/// Intelligent-driver acceleration. `leader` is (bumper gap, closing speed).
pub fn idm_accel(p: &IdmParams, v: f64, v_desired: f64, leader: Option<(f64, f64)>) -> f64 {
    let ratio = if v_desired > 1e-6 { v / v_desired } else { 1.0 };
    let free = p.max_accel * (1.0 - ratio * ratio * ratio * ratio);
    let a = match leader {
        Some((gap, closing)) => {
            let s_star = p.min_gap + (v * p.time_headway + v * closing / (2.0 * libm::sqrt(p.max_accel * p.comfort_decel))).max(0.0);
            let gap = gap.max(0.1);
            free - p.max_accel * (s_star / gap) * (s_star / gap)
        }
        None => free,
    };
    a.clamp(-MAX_BRAKE, p.max_accel)
}
