//! Two-level task set, curriculum selections and episode schedules.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt::Write as _;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks;

pub const BLOCK_TAG: &str = "CURRICULUM";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurriculumError {
    #[error("curriculum parse failure: {0}")]
    ParseFailure(String),
    #[error("task ({0}, {1}) outside the task set")]
    OutOfRange(usize, usize),
    #[error("curriculum needs at least one task with positive total weight")]
    Empty,
}

/// Task index: level-1 is traffic density, level-2 the SV speed mode (or the
/// intersection manoeuvre). Ordered by density first, then mode, which is also
/// the difficulty order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId {
    pub density: usize,
    pub mode: usize,
}

impl TaskId {
    pub const fn new(density: usize, mode: usize) -> Self {
        Self { density, mode }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub n_l1_max: usize,
    pub n_l2_max: usize,
    pub l1_labels: Vec<String>,
    pub l2_labels: Vec<String>,
}

impl TaskSet {
    /// Bounds follow the label counts.
    pub fn new(l1_labels: Vec<String>, l2_labels: Vec<String>) -> Self {
        assert!(!l1_labels.is_empty() && !l2_labels.is_empty());
        Self { n_l1_max: l1_labels.len() - 1, n_l2_max: l2_labels.len() - 1, l1_labels, l2_labels }
    }

    pub fn contains(&self, t: TaskId) -> bool {
        t.density <= self.n_l1_max && t.mode <= self.n_l2_max
    }

    pub fn len(&self) -> usize {
        (self.n_l1_max + 1) * (self.n_l2_max + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tasks(&self) -> impl Iterator<Item = TaskId> + '_ {
        (0..=self.n_l1_max).flat_map(move |i| (0..=self.n_l2_max).map(move |j| TaskId::new(i, j)))
    }

    pub fn label(&self, t: TaskId) -> String {
        let l1 = self.l1_labels.get(t.density).map(String::as_str).unwrap_or("?");
        let l2 = self.l2_labels.get(t.mode).map(String::as_str).unwrap_or("?");
        format!("{l1}/{l2}")
    }

    /// Human-readable listing for prompts.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for t in self.tasks() {
            let _ = writeln!(s, "({}, {}) = {}", t.density, t.mode, self.label(t));
        }
        s
    }
}

/// Weighted task subset for one stage (or one curriculum refresh within it).
/// Canonical form: tasks sorted ascending, no duplicates, weights nonnegative
/// with a positive sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSpec {
    pub stage: u32,
    pub entries: Vec<(TaskId, f64)>,
}

impl CurriculumSpec {
    /// Builds a canonical spec, merging duplicates by summing weights.
    pub fn new(stage: u32, entries: impl IntoIterator<Item = (TaskId, f64)>) -> Result<Self, CurriculumError> {
        let mut v: Vec<(TaskId, f64)> = Vec::new();
        for (t, w) in entries {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(CurriculumError::ParseFailure(format!("invalid weight {w}")));
            }
            match v.iter_mut().find(|(u, _)| *u == t) {
                Some(e) => e.1 += w,
                None => v.push((t, w)),
            }
        }
        v.sort_by(|a, b| a.0.cmp(&b.0));
        if v.is_empty() || !(v.iter().map(|e| e.1).sum::<f64>() > 0.0) {
            return Err(CurriculumError::Empty);
        }
        Ok(Self { stage, entries: v })
    }

    /// Product of a level-1 weight vector and a level-2 weight vector over the whole set.
    pub fn product(stage: u32, density_weights: &[f64], mode_weights: &[f64]) -> Result<Self, CurriculumError> {
        let mut e = Vec::new();
        for (i, wi) in density_weights.iter().enumerate() {
            for (j, wj) in mode_weights.iter().enumerate() {
                e.push((TaskId::new(i, j), wi * wj));
            }
        }
        Self::new(stage, e)
    }

    pub fn tasks(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn with_stage(mut self, stage: u32) -> Self {
        self.stage = stage;
        self
    }

    /// Canonical fenced block.
    pub fn print(&self) -> String {
        let mut body = format!("stage {}\n", self.stage);
        for (t, w) in &self.entries {
            let _ = writeln!(body, "({}, {}) weight {:?}", t.density, t.mode, w);
        }
        blocks::fence(BLOCK_TAG, &body)
    }
}

fn parse_line(line: &str) -> Result<(TaskId, f64), String> {
    let l = line.trim();
    let open = l.strip_prefix('(').ok_or_else(|| format!("expected '(' in `{l}`"))?;
    let (inner, rest) = open.split_once(')').ok_or_else(|| format!("expected ')' in `{l}`"))?;
    let (a, b) = inner.split_once(',').ok_or_else(|| format!("expected 'i, j' in `{l}`"))?;
    let i: usize = a.trim().parse().map_err(|_| format!("bad level-1 index `{}`", a.trim()))?;
    let j: usize = b.trim().parse().map_err(|_| format!("bad level-2 index `{}`", b.trim()))?;
    let rest = rest.trim();
    let w = if rest.is_empty() {
        1.0
    } else {
        let v = rest.strip_prefix("weight").ok_or_else(|| format!("unexpected `{rest}`"))?;
        let v = v.trim().trim_start_matches(['=', ':']).trim();
        v.parse::<f64>().map_err(|_| format!("bad weight `{v}`"))?
    };
    Ok((TaskId::new(i, j), w))
}

/// Extracts the curriculum block from agent output and validates it against `ts`.
pub fn parse_curriculum(text: &str, ts: &TaskSet) -> Result<CurriculumSpec, CurriculumError> {
    let body = blocks::find_block(text, BLOCK_TAG).ok_or_else(|| CurriculumError::ParseFailure("missing CURRICULUM block".to_string()))?;
    let mut stage = 0;
    let mut entries = Vec::new();
    for line in body.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(n) = line.strip_prefix("stage") {
            stage = n.trim().parse().map_err(|_| CurriculumError::ParseFailure(format!("bad stage `{line}`")))?;
            continue;
        }
        let (t, w) = parse_line(line).map_err(CurriculumError::ParseFailure)?;
        if !ts.contains(t) {
            return Err(CurriculumError::OutOfRange(t.density, t.mode));
        }
        entries.push((t, w));
    }
    CurriculumSpec::new(stage, entries)
}

/// Largest-remainder apportionment of `n` episodes over `weights`; ties in the
/// remainder go to the earlier entry.
pub fn apportion(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - libm::floor(quotas[a]);
        let rb = quotas[b] - libm::floor(quotas[b]);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Episode schedule: per-task counts proportional to the weights, shuffled by `seed`.
pub fn schedule(spec: &CurriculumSpec, n_episodes: usize, seed: u64) -> Vec<TaskId> {
    let weights: Vec<f64> = spec.entries.iter().map(|e| e.1).collect();
    let counts = apportion(&weights, n_episodes);
    let mut out = Vec::with_capacity(n_episodes);
    for ((t, _), c) in spec.entries.iter().zip(counts) {
        out.extend(core::iter::repeat(*t).take(c));
    }
    let mut rng = crate::rng::rng(seed);
    out.shuffle(&mut rng);
    out
}

/// The most demanding task of the spec under the density-then-mode order.
pub fn hardest_task(spec: &CurriculumSpec) -> TaskId {
    spec.tasks().max().expect("canonical spec is non-empty")
}

/// Baseline expert curriculum: densities 1:2:2:5 and speed modes 1:1:3.
pub fn baseline(stage: u32) -> CurriculumSpec {
    CurriculumSpec::product(stage, &[1.0, 2.0, 2.0, 5.0], &[1.0, 1.0, 3.0]).expect("positive weights")
}

/// Every episode on the highest density, speed modes 1:1:3.
pub fn direct_high_density(stage: u32, ts: &TaskSet) -> CurriculumSpec {
    let mut dw = vec![0.0; ts.n_l1_max + 1];
    dw[ts.n_l1_max] = 1.0;
    CurriculumSpec::product(stage, &dw, &[1.0, 1.0, 3.0])
        .map(|s| CurriculumSpec::new(stage, s.entries.into_iter().filter(|e| e.1 > 0.0)).unwrap())
        .expect("positive weights")
}
