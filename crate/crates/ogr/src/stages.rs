//! The stage machine: orchestrate, analyse, generate one reward-curriculum
//! pair per branch, train the branches in parallel, test and score them,
//! reflect, and carry the winner into the next stage.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use ogr_core::agents::{
    build_prompt, invoke, AgentError, Attachment, Backend, DialogueSink, ParseContext, Payload, PromptBundle, PromptInputs, Role,
    StagePlan, Template,
};
use ogr_core::curriculum::{apportion, baseline, hardest_task, schedule, CurriculumSpec};
use ogr_core::rewardlang::{check, expert_program, parse_program, AugmentationProposal, ObservationRegistry, RewardProgram, GRAMMAR};
use ogr_core::rl::PolicyParams;
use ogr_core::rng::child_seed;
use ogr_core::sim::{Scenario, Status};
use ogr_core::train::{in_training_test, RolloutClip, TestReport, TrainError, Trainer, TrainingLog};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{ConfigError, RunConfig};
use crate::memory::{sha256_hex, LogHeader, Memory, MemoryError, NewRecord};
use crate::records::{to_payload, BranchSummary, CheckpointRef, ClipRef, Kind, StageSummary, TestRecord};
use crate::review::{QueueStore, ReviewError};

/// Parse attempts per agent call before the caller falls back.
pub const REQUERY_BUDGET: usize = 3;
pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("prompt assembly: {0}")]
    Prompt(AgentError),
    #[error("run state: {0}")]
    State(String),
    #[error("all {0} stages are complete")]
    Finished(u32),
}

/// What the next stage starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    /// Next stage to run, from 1.
    pub stage: u32,
    /// Winning checkpoint of each completed stage, relative to the run directory.
    pub winners: Vec<String>,
    pub registry: ObservationRegistry,
    /// Winning reward program source of the last stage.
    pub reward: String,
    pub curriculum: CurriculumSpec,
    pub metrics: String,
    pub reward_trajectory: String,
    pub outcome_history: String,
    pub config_hash: String,
}

/// Everything one branch produced in a stage.
#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub index: usize,
    pub program: RewardProgram,
    pub spec: CurriculumSpec,
    pub checkpoint: String,
    pub report: TestReport,
    pub scores: Vec<u8>,
    pub mean_score: f64,
    pub generation_fallback: bool,
    pub proposals: Vec<AugmentationProposal>,
    pub params: PolicyParams,
    pub log: TrainingLog,
}

/// Fallback reflection: highest SR, then highest mean score, then lowest index.
pub fn fallback_winner(metrics: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, m) in metrics.iter().enumerate().skip(1) {
        let b = metrics[best];
        if m.0.total_cmp(&b.0).then(m.1.total_cmp(&b.1)).is_gt() {
            best = i;
        }
    }
    best
}

/// Score used when the scorer never answers parseably.
pub fn fallback_score(outcome: Status) -> u8 {
    match outcome {
        Status::Success => 7,
        Status::Timeout => 3,
        Status::Collision | Status::Running => 0,
    }
}

fn mean(xs: &[u8]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
    }
}

pub fn format_outcomes(log: &TrainingLog, window: usize) -> String {
    let mut s = String::new();
    for (k, (sr, cr, tor)) in log.outcome_history(window).iter().enumerate() {
        let a = k * window + 1;
        let b = ((k + 1) * window).min(log.episodes.len());
        let _ = writeln!(s, "episodes {a}-{b}: SR {sr:.2} CR {cr:.2} TOR {tor:.2}");
    }
    if s.is_empty() {
        s.push_str("(no episodes yet)\n");
    }
    s
}

pub fn format_rewards(log: &TrainingLog, window: usize, names: &[String]) -> String {
    let mut s = String::new();
    for (k, (total, terms)) in log.reward_history(window).iter().enumerate() {
        let _ = write!(s, "window {}: total {total:.3} |", k + 1);
        for (n, v) in names.iter().zip(terms) {
            let _ = write!(s, " {n} {v:.3}");
        }
        s.push('\n');
    }
    if s.is_empty() {
        s.push_str("(no episodes yet)\n");
    }
    s
}

/// Records the exchange `invoke` completes and remembers its id.
struct Capture<'m> {
    memory: &'m Memory,
    id: RefCell<Option<Result<u64, MemoryError>>>,
}

impl DialogueSink for Capture<'_> {
    fn record(&self, bundle: &PromptBundle, response: &str) {
        *self.id.borrow_mut() = Some(self.memory.record_dialogue(bundle, response));
    }
}

pub struct Runner<'a> {
    pub cfg: RunConfig,
    pub scenario: Scenario,
    pub memory: Memory,
    backend: &'a dyn Backend,
    queue: QueueStore,
    templates: BTreeMap<Role, Template>,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: RunConfig, backend: &'a dyn Backend) -> Result<Self, LoopError> {
        cfg.validate()?;
        let scenario = cfg.load_scenario()?;
        fs::create_dir_all(&cfg.out).map_err(|e| LoopError::State(e.to_string()))?;
        let header = LogHeader::new(&scenario.name, scenario.task_set.clone(), cfg.n_g);
        let memory = Memory::open_or_create(&cfg.out, header)?;
        let mut templates = BTreeMap::new();
        for r in Role::ALL {
            let t = match &cfg.templates {
                Some(dir) => {
                    let path = dir.join(format!("{}.txt", r.name()));
                    let text = fs::read_to_string(&path).map_err(|e| ConfigError::Read { path, message: e.to_string() })?;
                    Template::parse(r, &text).map_err(LoopError::Prompt)?
                }
                None => Template::builtin(r),
            };
            templates.insert(r, t);
        }
        Ok(Self { queue: QueueStore::new(&cfg.out), cfg, scenario, memory, backend, templates })
    }

    pub fn out(&self) -> &Path {
        &self.cfg.out
    }

    pub fn initial_state(&self) -> RunState {
        RunState {
            stage: 1,
            winners: Vec::new(),
            registry: ObservationRegistry::initial(),
            reward: expert_program().print(),
            curriculum: baseline(0),
            metrics: "(no previous stage)".into(),
            reward_trajectory: "(no previous stage)".into(),
            outcome_history: "(no previous stage)".into(),
            config_hash: self.cfg.config_hash(),
        }
    }

    /// The saved state of this run directory, or a fresh one.
    pub fn load_state(&self) -> Result<RunState, LoopError> {
        let path = self.out().join(STATE_FILE);
        if !path.exists() {
            return Ok(self.initial_state());
        }
        let text = fs::read_to_string(&path).map_err(|e| LoopError::State(e.to_string()))?;
        let st: RunState = serde_json::from_str(&text).map_err(|e| LoopError::State(e.to_string()))?;
        if st.config_hash != self.cfg.config_hash() {
            return Err(LoopError::State("run directory belongs to a different training configuration".into()));
        }
        Ok(st)
    }

    fn save_state(&self, st: &RunState) -> Result<(), LoopError> {
        let path = self.out().join(STATE_FILE);
        let tmp = path.with_extension("tmp");
        let body = serde_json::to_string_pretty(st).map_err(|e| LoopError::State(e.to_string()))?;
        fs::write(&tmp, body).and_then(|_| fs::rename(&tmp, &path)).map_err(|e| LoopError::State(e.to_string()))
    }

    /// Runs the remaining stages, persisting state after each.
    pub fn run(&self, mut on_stage: impl FnMut(&StageSummary)) -> Result<Vec<StageSummary>, LoopError> {
        let mut st = self.load_state()?;
        let mut out = Vec::new();
        while st.stage <= self.cfg.stages {
            let (next, summary) = self.run_stage(st)?;
            self.save_state(&next)?;
            on_stage(&summary);
            out.push(summary);
            st = next;
        }
        Ok(out)
    }

    fn ctx(&self, stage: u32) -> ParseContext<'_> {
        ParseContext { stage, task_set: &self.scenario.task_set, n_branches: self.cfg.n_g }
    }

    /// One agent call with up to `REQUERY_BUDGET` attempts. Returns the
    /// parsed payload and the id of the dialogue it came from, or `None`
    /// once the budget is spent.
    pub fn ask(&self, role: Role, stage: u32, inputs: &PromptInputs) -> Result<Option<(Payload, u64)>, LoopError> {
        let base = build_prompt(role, stage, &self.templates[&role], &self.memory, inputs).map_err(LoopError::Prompt)?;
        let mut bundle = base.clone();
        for _ in 0..REQUERY_BUDGET {
            let sink = Capture { memory: &self.memory, id: RefCell::new(None) };
            let err = match invoke(self.backend, &bundle, &sink) {
                Ok(text) => {
                    let id = sink.id.into_inner().expect("invoke records successful exchanges")?;
                    match ogr_core::agents::parse_response(role, &text, &self.ctx(stage)) {
                        Ok(p) => return Ok(Some((p, id))),
                        Err(e) => e,
                    }
                }
                Err(e @ AgentError::AttachmentLimit { .. }) => return Err(LoopError::Prompt(e)),
                Err(e) => e,
            };
            bundle = base.clone();
            bundle
                .user
                .push_str(&format!("\n\nYour previous reply could not be used ({err}). Answer again in exactly the requested format."));
        }
        Ok(None)
    }

    fn record_payload(
        &self,
        stage: u32,
        kind: Kind,
        role: Role,
        branch: Option<usize>,
        payload: &Payload,
        from: Option<u64>,
    ) -> Result<u64, LoopError> {
        Ok(self.memory.append(NewRecord::new(stage, kind, payload.render()).role(role).branch(branch).derived_from(from))?)
    }

    fn inputs(&self, branch: Option<usize>) -> PromptInputs {
        let mut p = PromptInputs::default().with("goal", self.cfg.goal.clone());
        p.branch = branch;
        p
    }

    fn ckpt_path(&self, rel: &str) -> PathBuf {
        self.out().join(rel)
    }

    fn save_checkpoint(&self, rel: &str, c: &Checkpoint, stage: u32, winner: bool) -> Result<(), LoopError> {
        let path = self.ckpt_path(rel);
        c.save(&path)?;
        let sha = sha256_hex(c.to_text().as_bytes());
        let r = CheckpointRef { path: rel.to_string(), sha256: sha, branch: c.branch, winner };
        self.memory.append(NewRecord::new(stage, Kind::CheckpointRef, to_payload(&r)).branch(Some(c.branch)))?;
        Ok(())
    }

    fn starting_params(&self, st: &RunState) -> Result<PolicyParams, LoopError> {
        match st.winners.last() {
            Some(rel) => Ok(Checkpoint::load_for(&self.ckpt_path(rel), &st.config_hash)?.params),
            None => Ok(PolicyParams::new(&self.cfg.train.hidden, child_seed(self.cfg.seed, "init", 0))),
        }
    }

    /// Runs stage `st.stage` end to end.
    pub fn run_stage(&self, st: RunState) -> Result<(RunState, StageSummary), LoopError> {
        let n = st.stage;
        if n > self.cfg.stages {
            return Err(LoopError::Finished(self.cfg.stages));
        }
        let mut registry = st.registry.clone();
        let exposed = self.queue.update(|q| Ok(q.apply_approved(&mut registry, n)))?;
        self.memory.set_registry_version(registry.version);
        if !exposed.is_empty() {
            self.memory.append(NewRecord::new(n, Kind::Registry, to_payload(&registry)))?;
        }
        let stage_seed = child_seed(self.cfg.seed, "stage", n as u64);
        let ts = &self.scenario.task_set;

        let inputs =
            self.inputs(None).with("task_set", ts.describe()).with("registry", registry.describe()).with("metrics", st.metrics.clone());
        let plan = match self.ask(Role::Orchestrator, n, &inputs)? {
            Some((Payload::Plan(p), id)) => {
                self.record_payload(n, Kind::StagePlan, Role::Orchestrator, None, &Payload::Plan(p.clone()), Some(id))?;
                p
            }
            _ => {
                let p = StagePlan {
                    stage: n,
                    plan: "Orchestrator unavailable; continue toward the overall goal.".into(),
                    reward_objective: self.cfg.goal.clone(),
                    curriculum_objective: self.cfg.goal.clone(),
                };
                self.record_payload(n, Kind::StagePlan, Role::Orchestrator, None, &Payload::Plan(p.clone()), None)?;
                p
            }
        };

        let reward_inputs = self
            .inputs(None)
            .with("registry", registry.describe())
            .with("reward_objective", plan.reward_objective.clone())
            .with("previous_reward", st.reward.clone())
            .with("reward_trajectory", st.reward_trajectory.clone());
        let reward_analysis = self.analyse(Role::RewardAnalyst, n, &reward_inputs)?;
        let curriculum_inputs = self
            .inputs(None)
            .with("task_set", ts.describe())
            .with("curriculum_objective", plan.curriculum_objective.clone())
            .with("previous_curriculum", st.curriculum.print())
            .with("outcome_history", st.outcome_history.clone());
        let curriculum_analysis = self.analyse(Role::CurriculumAnalyst, n, &curriculum_inputs)?;

        let start = self.starting_params(&st)?;
        let prev_reward = parse_program(&st.reward).map_err(|e| LoopError::State(e.to_string()))?;
        let shared = BranchShared {
            stage: n,
            stage_seed,
            plan: &plan,
            registry: &registry,
            reward_analysis: &reward_analysis,
            curriculum_analysis: &curriculum_analysis,
            start: &start,
            prev_reward: &prev_reward,
            prev_curriculum: &st.curriculum,
            prev_outcomes: &st.outcome_history,
        };
        let results: Vec<Result<BranchOutcome, LoopError>> = thread::scope(|s| {
            let handles: Vec<_> = (0..self.cfg.n_g)
                .map(|i| {
                    s.spawn({
                        let shared = &shared;
                        move || self.run_branch(shared, i)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("branch thread panicked")).collect()
        });
        let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;

        let proposals: Vec<AugmentationProposal> = outcomes.iter().flat_map(|o| o.proposals.clone()).collect();
        if !proposals.is_empty() {
            self.queue.update(|q| Ok(q.enqueue(proposals)))?;
        }

        let (winner, reflector_fallback) = self.reflect(n, &outcomes)?;
        let w = &outcomes[winner];
        let rel = format!("checkpoints/stage{n}_winner.ckpt");
        let ckpt = Checkpoint { stage: n, branch: winner, config_hash: st.config_hash.clone(), params: w.params.clone() };
        self.save_checkpoint(&rel, &ckpt, n, true)?;

        let summary = StageSummary {
            stage: n,
            winner,
            reflector_fallback,
            aborted_generation: outcomes.iter().all(|o| o.generation_fallback),
            registry_version: registry.version,
            branches: outcomes
                .iter()
                .map(|o| BranchSummary {
                    branch: o.index,
                    sr: o.report.sr,
                    cr: o.report.cr,
                    tor: o.report.tor,
                    scores: o.scores.clone(),
                    mean_score: o.mean_score,
                    generation_fallback: o.generation_fallback,
                    proposals: o.proposals.iter().map(|p| p.variable.clone()).collect(),
                })
                .collect(),
            checkpoint: rel.clone(),
        };
        self.memory.append(NewRecord::new(n, Kind::StageSummary, to_payload(&summary)))?;

        let window = (self.cfg.episodes_per_stage / 10).max(1);
        let mut winners = st.winners.clone();
        winners.push(rel);
        let next = RunState {
            stage: n + 1,
            winners,
            registry,
            reward: w.program.print(),
            curriculum: w.spec.clone(),
            metrics: summary.render(),
            reward_trajectory: format_rewards(&w.log, window, &w.program.terms.iter().map(|t| t.name.clone()).collect::<Vec<_>>()),
            outcome_history: format_outcomes(&w.log, window),
            config_hash: st.config_hash,
        };
        Ok((next, summary))
    }

    fn analyse(&self, role: Role, n: u32, inputs: &PromptInputs) -> Result<String, LoopError> {
        Ok(match self.ask(role, n, inputs)? {
            Some((p @ Payload::Analysis(_), id)) => {
                self.record_payload(n, Kind::Analysis, role, None, &p, Some(id))?;
                p.render()
            }
            _ => "(analysis unavailable)".into(),
        })
    }

    fn generate_reward(&self, sh: &BranchShared<'_>, i: usize) -> Result<Option<RewardProgram>, LoopError> {
        let inputs = self
            .inputs(Some(i))
            .with("registry", sh.registry.describe())
            .with("reward_objective", sh.plan.reward_objective.clone())
            .with("analysis", sh.reward_analysis.to_string())
            .with("dsl_grammar", GRAMMAR);
        Ok(match self.ask(Role::RewardGenerator, sh.stage, &inputs)? {
            Some((p @ Payload::Reward(_), id)) => {
                self.record_payload(sh.stage, Kind::RewardProgram, Role::RewardGenerator, Some(i), &p, Some(id))?;
                match p {
                    Payload::Reward(prog) => Some(prog),
                    _ => unreachable!(),
                }
            }
            _ => None,
        })
    }

    fn generate_curriculum(&self, sh: &BranchShared<'_>, i: usize, outcomes: &str) -> Result<Option<CurriculumSpec>, LoopError> {
        let inputs = self
            .inputs(Some(i))
            .with("task_set", self.scenario.task_set.describe())
            .with("curriculum_objective", sh.plan.curriculum_objective.clone())
            .with("analysis", sh.curriculum_analysis.to_string())
            .with("outcome_history", outcomes.to_string());
        Ok(match self.ask(Role::CurriculumGenerator, sh.stage, &inputs)? {
            Some((p @ Payload::Curriculum(_), id)) => {
                self.record_payload(sh.stage, Kind::CurriculumSpec, Role::CurriculumGenerator, Some(i), &p, Some(id))?;
                match p {
                    Payload::Curriculum(c) => Some(c),
                    _ => unreachable!(),
                }
            }
            _ => None,
        })
    }

    fn run_branch(&self, sh: &BranchShared<'_>, i: usize) -> Result<BranchOutcome, LoopError> {
        let n = sh.stage;
        let seed = child_seed(sh.stage_seed, "branch", i as u64);
        let reward = self.generate_reward(sh, i)?;
        let curriculum = self.generate_curriculum(sh, i, sh.prev_outcomes)?;
        let generation_fallback = reward.is_none() || curriculum.is_none();
        let program = match reward {
            Some(p) => p,
            None => {
                let p = sh.prev_reward.clone();
                self.record_payload(n, Kind::RewardProgram, Role::RewardGenerator, Some(i), &Payload::Reward(p.clone()), None)?;
                p
            }
        };
        let mut spec = match curriculum {
            Some(c) => c,
            None => {
                let c = sh.prev_curriculum.clone().with_stage(n);
                self.record_payload(n, Kind::CurriculumSpec, Role::CurriculumGenerator, Some(i), &Payload::Curriculum(c.clone()), None)?;
                c
            }
        };

        let checked = check(&program, sh.registry, n);
        for p in &checked.proposals {
            self.memory.append(NewRecord::new(n, Kind::Proposal, to_payload(p)).branch(Some(i)))?;
        }
        let bound = checked.bind();
        let mut trainer = Trainer::new(&self.scenario, sh.start.clone(), bound.clone(), self.cfg.train.clone(), seed);
        let chunks = apportion(&vec![1.0; self.cfg.curriculum_refreshes], self.cfg.episodes_per_stage);
        let window = (self.cfg.episodes_per_stage / self.cfg.curriculum_refreshes).max(1);
        for (k, &len) in chunks.iter().enumerate() {
            if len == 0 {
                continue;
            }
            if k > 0 {
                if let Some(c) = self.generate_curriculum(sh, i, &format_outcomes(&trainer.log, window))? {
                    spec = c;
                }
            }
            trainer.train(&schedule(&spec, len, child_seed(seed, "schedule", k as u64)))?;
        }
        let log = trainer.log.clone();
        let params = trainer.into_params()?;

        let rel = format!("checkpoints/stage{n}/branch{i}.ckpt");
        let ckpt = Checkpoint { stage: n, branch: i, config_hash: self.cfg.config_hash(), params: params.clone() };
        self.save_checkpoint(&rel, &ckpt, n, false)?;

        let (report, clips) = in_training_test(
            &self.scenario,
            &params,
            &spec,
            self.cfg.n_test,
            self.cfg.n_s,
            &bound,
            &self.cfg.train,
            i,
            child_seed(seed, "test", 0),
        )?;
        let test = TestRecord { branch: i, task: hardest_task(&spec), report: report.clone() };
        self.memory.append(NewRecord::new(n, Kind::TestReport, to_payload(&test)).branch(Some(i)))?;

        let mut scores = Vec::with_capacity(clips.len());
        for clip in &clips {
            scores.push(self.score_clip(n, i, clip)?);
        }
        Ok(BranchOutcome {
            index: i,
            program,
            spec,
            checkpoint: rel,
            report,
            mean_score: mean(&scores),
            scores,
            generation_fallback,
            proposals: checked.proposals.clone(),
            params,
            log,
        })
    }

    fn score_clip(&self, n: u32, i: usize, clip: &RolloutClip) -> Result<u8, LoopError> {
        let hash = self.memory.store_clip(clip)?;
        let r = ClipRef { hash, branch: i, episode: clip.episode, task: clip.task, outcome: clip.outcome, frames: clip.frames.len() };
        self.memory.append(NewRecord::new(n, Kind::Clip, to_payload(&r)).branch(Some(i)))?;
        let mut inputs = self.inputs(Some(i)).with("branch", i.to_string()).with("clip_summary", clip.transcript());
        inputs.attachments.push(Attachment {
            name: format!("clip_b{i}_e{}", clip.episode),
            media_type: "application/json".into(),
            body: to_payload(clip),
        });
        Ok(match self.ask(Role::Scorer, n, &inputs)? {
            Some((p @ Payload::Score(_), id)) => {
                self.record_payload(n, Kind::Score, Role::Scorer, Some(i), &p, Some(id))?;
                match p {
                    Payload::Score(s) => s,
                    _ => unreachable!(),
                }
            }
            _ => {
                let s = fallback_score(clip.outcome);
                self.record_payload(n, Kind::Score, Role::Scorer, Some(i), &Payload::Score(s), None)?;
                s
            }
        })
    }

    fn reflect(&self, n: u32, outcomes: &[BranchOutcome]) -> Result<(usize, bool), LoopError> {
        let mut text = String::new();
        for o in outcomes {
            let r = &o.report;
            let _ = writeln!(
                text,
                "branch {}: SR {:.2} CR {:.2} TOR {:.2} mean_reward {:.3} mean_length {:.1} mean_score {:.2} tested_task ({}, {})",
                o.index,
                r.sr,
                r.cr,
                r.tor,
                r.mean_reward,
                r.mean_length,
                o.mean_score,
                hardest_task(&o.spec).density,
                hardest_task(&o.spec).mode
            );
        }
        let inputs = self.inputs(None).with("branch_summaries", text).with("last_branch", (outcomes.len() - 1).to_string());
        match self.ask(Role::Reflector, n, &inputs)? {
            Some((p @ Payload::BestBranch(_), id)) => {
                self.record_payload(n, Kind::Selection, Role::Reflector, None, &p, Some(id))?;
                match p {
                    Payload::BestBranch(i) => Ok((i, false)),
                    _ => unreachable!(),
                }
            }
            _ => {
                let metrics: Vec<(f64, f64)> = outcomes.iter().map(|o| (o.report.sr, o.mean_score)).collect();
                let i = fallback_winner(&metrics);
                self.record_payload(n, Kind::Selection, Role::Reflector, None, &Payload::BestBranch(i), None)?;
                Ok((i, true))
            }
        }
    }
}

/// Read-only inputs every branch of a stage shares.
struct BranchShared<'s> {
    stage: u32,
    stage_seed: u64,
    plan: &'s StagePlan,
    registry: &'s ObservationRegistry,
    reward_analysis: &'s str,
    curriculum_analysis: &'s str,
    start: &'s PolicyParams,
    prev_reward: &'s RewardProgram,
    prev_curriculum: &'s CurriculumSpec,
    prev_outcomes: &'s str,
}
