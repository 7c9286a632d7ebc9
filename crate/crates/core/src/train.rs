//! Episode runner, per-branch trainer, in-training test and the per-density
//! evaluation harness.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::{hardest_task, CurriculumSpec, TaskId};
use crate::executor::{control, decode, ActionTriple, ControllerParams};
use crate::rewardlang::{BoundProgram, RewardError};
use crate::rl::{Learner, PolicyParams, PpoConfig, RlError, RolloutBuffer, UpdateStats, HIDDEN};
use crate::rng::{child_seed, rng, Rng};
use crate::sim::{Scenario, SimError, Status, StepRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Rl(#[from] RlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub hidden: Vec<usize>,
    /// Simulator steps per policy decision.
    pub action_repeat: usize,
    /// Episodes collected between gradient updates.
    pub episodes_per_update: usize,
    pub controller: ControllerParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            hidden: HIDDEN.to_vec(),
            action_repeat: 5,
            episodes_per_update: 10,
            controller: ControllerParams::default(),
        }
    }
}

/// How actions are chosen during an episode.
pub enum Mode<'a> {
    Sample(&'a mut Rng),
    Greedy,
}

/// One recorded policy decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipFrame {
    pub record: StepRecord,
    pub action: ActionTriple,
    pub reward: f64,
    /// Weighted contribution of each reward term over the decision.
    pub breakdown: Vec<f64>,
}

/// Structured transcript of one episode, attached to scorer prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutClip {
    pub branch: usize,
    pub episode: usize,
    pub task: TaskId,
    pub outcome: Status,
    pub term_names: Vec<String>,
    pub frames: Vec<ClipFrame>,
}

impl RolloutClip {
    /// Compact text rendering, one line per decision.
    pub fn transcript(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "clip branch={} episode={} task=({}, {}) outcome={:?} frames={}",
            self.branch,
            self.episode,
            self.task.density,
            self.task.mode,
            self.outcome,
            self.frames.len()
        );
        let _ = writeln!(s, "terms: {}", self.term_names.join(", "));
        for f in &self.frames {
            let e = &f.record.ego;
            let _ = write!(
                s,
                "t={} ego=({:.1},{:.1}) v={:.1} psi={:.2} action=({},{},{}) r={:.3} [",
                f.record.step, e.x, e.y, e.v, e.psi, f.action.waypoint, f.action.speed, f.action.lane, f.reward
            );
            for (i, b) in f.breakdown.iter().enumerate() {
                let _ = write!(s, "{}{:.3}", if i == 0 { "" } else { " " }, b);
            }
            let _ = write!(s, "] svs=");
            for sv in &f.record.svs {
                let _ = write!(s, "({:.1},{:.1},{:.1})", sv.x, sv.y, sv.v);
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task: TaskId,
    pub status: Status,
    /// Simulator steps taken.
    pub steps: u32,
    pub total_reward: f64,
    /// Summed weighted contribution per reward term.
    pub term_sums: Vec<f64>,
}

/// Runs one episode. Transitions go to `buffer` when given; a clip is
/// recorded when `clip` is true.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    scenario: &Scenario,
    task: TaskId,
    seed: u64,
    params: &PolicyParams,
    mut mode: Mode<'_>,
    reward: &BoundProgram,
    cfg: &TrainConfig,
    mut buffer: Option<&mut RolloutBuffer>,
    clip: bool,
) -> Result<(EpisodeResult, Option<Vec<ClipFrame>>), TrainError> {
    let mut ep = scenario.reset(task, seed)?;
    let v_limit = ep.world().v_limit;
    let dt = ep.params().dt;
    let n_terms = reward.term_names().len();
    let mut term_sums = alloc::vec![0.0; n_terms];
    let mut contrib = Vec::with_capacity(n_terms);
    let mut total_reward = 0.0;
    let mut frames = clip.then(Vec::new);
    while ep.status() == Status::Running {
        let obs = ep.observe();
        let dist = params.forward_one(&obs)?;
        let action = match &mut mode {
            Mode::Sample(r) => dist.sample(r),
            Mode::Greedy => dist.greedy(),
        };
        let wps = ep.nearest_waypoints()?;
        let target = decode(action, &wps, v_limit, cfg.controller.lane_width);
        ep.set_target(&target);
        let mut r = 0.0;
        let mut breakdown = alloc::vec![0.0; n_terms];
        for _ in 0..cfg.action_repeat.max(1) {
            let cmd = control(&ep.state().ego, &target, &cfg.controller);
            let info = ep.step(&cmd, dt)?;
            r += reward.evaluate(&info.vars, &mut contrib)?;
            for (b, c) in breakdown.iter_mut().zip(&contrib) {
                *b += c;
            }
            if info.status != Status::Running {
                break;
            }
        }
        total_reward += r;
        for (s, b) in term_sums.iter_mut().zip(&breakdown) {
            *s += b;
        }
        if let Some(f) = frames.as_mut() {
            f.push(ClipFrame { record: ep.record(), action, reward: r, breakdown });
        }
        if let Some(buf) = buffer.as_deref_mut() {
            buf.push(&obs, action, dist.log_prob(&action), r, dist.value);
            match ep.status() {
                Status::Running => {}
                Status::Timeout => {
                    let next = params.forward_one(&ep.observe())?.value;
                    buf.finish_truncated(next);
                }
                Status::Success | Status::Collision => buf.finish_terminal(),
            }
        }
    }
    let res = EpisodeResult { task, status: ep.status(), steps: ep.step_count(), total_reward, term_sums };
    Ok((res, frames))
}

/// Success, collision and timeout fractions plus reward statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub sr: f64,
    pub cr: f64,
    pub tor: f64,
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub mean_length: f64,
    pub mean_reward: f64,
    pub term_means: BTreeMap<String, f64>,
}

impl TestReport {
    pub fn from_results(results: &[EpisodeResult], term_names: &[String]) -> Self {
        let n = results.len();
        let count = |s: Status| results.iter().filter(|r| r.status == s).count();
        let (successes, collisions, timeouts) = (count(Status::Success), count(Status::Collision), count(Status::Timeout));
        let nf = n.max(1) as f64;
        let mut term_means = BTreeMap::new();
        for (i, name) in term_names.iter().enumerate() {
            term_means.insert(name.clone(), results.iter().map(|r| r.term_sums[i]).sum::<f64>() / nf);
        }
        let (sr, cr) = (successes as f64 / nf, collisions as f64 / nf);
        Self {
            sr,
            cr,
            tor: timeouts as f64 / nf,
            episodes: n,
            successes,
            collisions,
            timeouts,
            mean_length: results.iter().map(|r| r.steps as f64).sum::<f64>() / nf,
            mean_reward: results.iter().map(|r| r.total_reward).sum::<f64>() / nf,
            term_means,
        }
    }
}

/// Training history one branch accumulates; feeds the analyst prompts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeResult>,
    pub updates: Vec<UpdateStats>,
}

impl TrainingLog {
    /// Per-window (SR, CR, TOR) over consecutive chunks of `window` episodes.
    pub fn outcome_history(&self, window: usize) -> Vec<(f64, f64, f64)> {
        self.episodes
            .chunks(window.max(1))
            .map(|c| {
                let r = TestReport::from_results(c, &[]);
                (r.sr, r.cr, r.tor)
            })
            .collect()
    }

    /// Per-window mean total reward and mean per-term sums.
    pub fn reward_history(&self, window: usize) -> Vec<(f64, Vec<f64>)> {
        self.episodes
            .chunks(window.max(1))
            .map(|c| {
                let n = c.len() as f64;
                let k = c[0].term_sums.len();
                let terms = (0..k).map(|i| c.iter().map(|e| e.term_sums[i]).sum::<f64>() / n).collect();
                (c.iter().map(|e| e.total_reward).sum::<f64>() / n, terms)
            })
            .collect()
    }
}

/// One branch's learner plus its private random stream and buffer.
pub struct Trainer<'a> {
    pub scenario: &'a Scenario,
    pub reward: BoundProgram,
    pub cfg: TrainConfig,
    pub learner: Learner,
    pub log: TrainingLog,
    seed: u64,
    rng: Rng,
    buffer: RolloutBuffer,
    pending: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(scenario: &'a Scenario, params: PolicyParams, reward: BoundProgram, cfg: TrainConfig, seed: u64) -> Self {
        Self {
            scenario,
            reward,
            learner: Learner::new(params, cfg.ppo),
            cfg,
            log: TrainingLog::default(),
            seed,
            rng: rng(child_seed(seed, "actions", 0)),
            buffer: RolloutBuffer::new(),
            pending: 0,
        }
    }

    pub fn params(&self) -> &PolicyParams {
        &self.learner.params
    }

    pub fn set_reward(&mut self, reward: BoundProgram) {
        self.reward = reward;
    }

    /// Trains on `tasks` in order, updating every `episodes_per_update` episodes.
    pub fn train(&mut self, tasks: &[TaskId]) -> Result<(), TrainError> {
        for &task in tasks {
            let ep_seed = child_seed(self.seed, "episode", self.log.episodes.len() as u64);
            let (res, _) = run_episode(
                self.scenario,
                task,
                ep_seed,
                &self.learner.params,
                Mode::Sample(&mut self.rng),
                &self.reward,
                &self.cfg,
                Some(&mut self.buffer),
                false,
            )?;
            self.log.episodes.push(res);
            self.pending += 1;
            if self.pending >= self.cfg.episodes_per_update {
                self.flush()?;
            }
        }
        Ok(())
    }

    /// Applies an update on whatever is buffered.
    pub fn flush(&mut self) -> Result<(), TrainError> {
        self.pending = 0;
        if self.buffer.is_empty() {
            return Ok(());
        }
        self.buffer.compute_gae(self.cfg.ppo.gamma, self.cfg.ppo.gae_lambda);
        match self.learner.update(&mut self.buffer, &mut self.rng) {
            Ok(stats) => self.log.updates.push(stats),
            Err(RlError::NonFiniteLoss) => self.buffer.clear(),
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    pub fn into_params(mut self) -> Result<PolicyParams, TrainError> {
        self.flush()?;
        Ok(self.learner.params)
    }
}

/// Greedy test on the hardest task of `spec`; returns the report and up to
/// `n_clips` clips sampled uniformly without replacement.
#[allow(clippy::too_many_arguments)]
pub fn in_training_test(
    scenario: &Scenario,
    params: &PolicyParams,
    spec: &CurriculumSpec,
    n_test: usize,
    n_clips: usize,
    reward: &BoundProgram,
    cfg: &TrainConfig,
    branch: usize,
    seed: u64,
) -> Result<(TestReport, Vec<RolloutClip>), TrainError> {
    let task = hardest_task(spec);
    let n_test = n_test.max(1);
    let mut pick_rng = rng(child_seed(seed, "clips", 0));
    let mut picked: Vec<usize> = sample(&mut pick_rng, n_test, n_clips.min(n_test)).into_vec();
    picked.sort_unstable();
    let mut results = Vec::with_capacity(n_test);
    let mut clips = Vec::new();
    for i in 0..n_test {
        let want = picked.binary_search(&i).is_ok();
        let (res, frames) = run_episode(scenario, task, child_seed(seed, "test", i as u64), params, Mode::Greedy, reward, cfg, None, want)?;
        if let Some(frames) = frames {
            clips.push(RolloutClip { branch, episode: i, task, outcome: res.status, term_names: reward.term_names().to_vec(), frames });
        }
        results.push(res);
    }
    Ok((TestReport::from_results(&results, reward.term_names()), clips))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub density: String,
    pub report: TestReport,
}

/// Greedy evaluation, `n_per_density` episodes per density band. Speed modes
/// cycle through every level-2 index unless `mode` pins one.
pub fn evaluate_policy(
    scenario: &Scenario,
    params: &PolicyParams,
    n_per_density: usize,
    reward: &BoundProgram,
    cfg: &TrainConfig,
    mode: Option<usize>,
    seed: u64,
) -> Result<Vec<DensityRow>, TrainError> {
    let ts = &scenario.task_set;
    let mut rows = Vec::new();
    for d in 0..=ts.n_l1_max {
        let mut results = Vec::with_capacity(n_per_density);
        for i in 0..n_per_density {
            let m = mode.unwrap_or(i % (ts.n_l2_max + 1));
            let task = TaskId::new(d, m);
            let s = child_seed(seed, "eval", (d * n_per_density + i) as u64);
            results.push(run_episode(scenario, task, s, params, Mode::Greedy, reward, cfg, None, false)?.0);
        }
        rows.push(DensityRow { density: ts.l1_labels[d].clone(), report: TestReport::from_results(&results, reward.term_names()) });
    }
    Ok(rows)
}

/// Plain-text table of evaluation rows.
pub fn format_table(rows: &[DensityRow]) -> String {
    let mut s = String::from("density     SR      CR      TOR     episodes  mean_len  mean_reward\n");
    for r in rows {
        let p = &r.report;
        let _ = writeln!(
            s,
            "{:<10} {:>6.1}% {:>6.1}% {:>6.1}% {:>9} {:>9.1} {:>12.3}",
            r.density,
            100.0 * p.sr,
            100.0 * p.cr,
            100.0 * p.tor,
            p.episodes,
            p.mean_length,
            p.mean_reward
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewardlang::{check, expert_program, ObservationRegistry};
    use crate::sim::scenarios::overtaking;

    fn expert() -> BoundProgram {
        check(&expert_program(), &ObservationRegistry::initial(), 1).bind()
    }

    #[test]
    fn episode_runs_to_a_terminal_status() {
        let sc = overtaking();
        let p = PolicyParams::new(&[16, 16], 1);
        let cfg = TrainConfig::default();
        let mut buf = RolloutBuffer::new();
        let mut r = rng(2);
        let (res, frames) =
            run_episode(&sc, TaskId::new(2, 0), 5, &p, Mode::Sample(&mut r), &expert(), &cfg, Some(&mut buf), true).unwrap();
        assert_ne!(res.status, Status::Running);
        let frames = frames.unwrap();
        assert_eq!(frames.len(), buf.len());
        assert!(frames.len() as u32 <= res.steps);
        assert_eq!(frames.last().unwrap().record.status, res.status);
        let sum: f64 = frames.iter().map(|f| f.reward).sum();
        assert!((sum - res.total_reward).abs() < 1e-9);
    }

    #[test]
    fn greedy_episodes_are_deterministic() {
        let sc = overtaking();
        let p = PolicyParams::new(&[16, 16], 3);
        let cfg = TrainConfig::default();
        let a = run_episode(&sc, TaskId::new(3, 2), 9, &p, Mode::Greedy, &expert(), &cfg, None, true).unwrap();
        let b = run_episode(&sc, TaskId::new(3, 2), 9, &p, Mode::Greedy, &expert(), &cfg, None, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_trichotomy() {
        let mk = |status| EpisodeResult { task: TaskId::new(0, 0), status, steps: 10, total_reward: 1.0, term_sums: alloc::vec![] };
        let rs = [mk(Status::Success), mk(Status::Collision), mk(Status::Timeout), mk(Status::Success)];
        let r = TestReport::from_results(&rs, &[]);
        assert_eq!((r.sr, r.cr), (0.5, 0.25));
        assert!((r.sr + r.cr + r.tor - 1.0).abs() < 1e-9);
        assert_eq!(r.successes + r.collisions + r.timeouts, r.episodes);
    }
}
