//! Role-specific payloads carried in fenced blocks and `KEY: value` fields.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{AgentError, Role};
use crate::blocks::{fence, find_block, find_field};
use crate::curriculum::{parse_curriculum, CurriculumSpec, TaskSet};
use crate::rewardlang::{parse_program, RewardProgram};

pub const MAX_SCORE: u8 = 10;

/// Orchestrator output for one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stage: u32,
    pub plan: String,
    pub reward_objective: String,
    pub curriculum_objective: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermProposal {
    pub name: String,
    pub meaning: String,
    pub kind: String,
    pub range: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalysisReport {
    Reward { terms: Vec<TermProposal> },
    Curriculum { verdict: String, assessment: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Plan(StagePlan),
    Analysis(AnalysisReport),
    Reward(RewardProgram),
    Curriculum(CurriculumSpec),
    Score(u8),
    BestBranch(usize),
}

/// What a parser needs beyond the text.
#[derive(Debug, Clone, Copy)]
pub struct ParseContext<'a> {
    pub stage: u32,
    pub task_set: &'a TaskSet,
    pub n_branches: usize,
}

fn fail(role: Role, message: impl Into<String>) -> AgentError {
    AgentError::ParseFailure { role, message: message.into() }
}

fn block_or_field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    find_block(text, key).map(str::trim).or_else(|| find_field(text, key))
}

fn parse_score(v: &str) -> Option<u8> {
    let v = v.trim();
    let v = v.strip_suffix("/10").or_else(|| v.strip_suffix("/ 10")).unwrap_or(v).trim();
    v.parse::<u8>().ok().filter(|&s| s <= MAX_SCORE)
}

/// Parses a backend response for `role`. Never panics.
pub fn parse_response(role: Role, text: &str, ctx: &ParseContext<'_>) -> Result<Payload, AgentError> {
    if text.trim().is_empty() {
        return Err(fail(role, "empty response"));
    }
    match role {
        Role::Orchestrator => {
            let r = find_block(text, "REWARD_OBJECTIVE").map(str::trim).unwrap_or("");
            let c = find_block(text, "CURRICULUM_OBJECTIVE").map(str::trim).unwrap_or("");
            if r.is_empty() || c.is_empty() {
                return Err(fail(role, "missing REWARD_OBJECTIVE or CURRICULUM_OBJECTIVE block"));
            }
            let plan = find_block(text, "PLAN").map(str::trim).unwrap_or(text.trim());
            Ok(Payload::Plan(StagePlan {
                stage: ctx.stage,
                plan: plan.to_string(),
                reward_objective: r.to_string(),
                curriculum_objective: c.to_string(),
            }))
        }
        Role::RewardAnalyst => {
            let body = find_block(text, "ANALYSIS").ok_or_else(|| fail(role, "missing ANALYSIS block"))?;
            let mut terms = Vec::new();
            for line in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
                let parts: Vec<&str> = line.split('|').map(str::trim).collect();
                if parts.len() != 4 || parts.iter().any(|p| p.is_empty()) {
                    return Err(fail(role, format!("expected `name | meaning | type | range`, got `{line}`")));
                }
                terms.push(TermProposal {
                    name: parts[0].to_string(),
                    meaning: parts[1].to_string(),
                    kind: parts[2].to_string(),
                    range: parts[3].to_string(),
                });
            }
            if terms.is_empty() {
                return Err(fail(role, "analysis lists no terms"));
            }
            Ok(Payload::Analysis(AnalysisReport::Reward { terms }))
        }
        Role::CurriculumAnalyst => {
            let body = find_block(text, "ANALYSIS").ok_or_else(|| fail(role, "missing ANALYSIS block"))?;
            let verdict = find_field(body, "verdict").unwrap_or("");
            let assessment = find_field(body, "assessment").unwrap_or("");
            if verdict.is_empty() || assessment.is_empty() {
                return Err(fail(role, "missing verdict or assessment"));
            }
            Ok(Payload::Analysis(AnalysisReport::Curriculum { verdict: verdict.to_string(), assessment: assessment.to_string() }))
        }
        Role::RewardGenerator => {
            let body = find_block(text, crate::rewardlang::BLOCK_TAG).ok_or_else(|| fail(role, "missing REWARD block"))?;
            parse_program(body).map(Payload::Reward).map_err(|e| fail(role, e.to_string()))
        }
        Role::CurriculumGenerator => {
            let spec = parse_curriculum(text, ctx.task_set).map_err(|e| fail(role, e.to_string()))?;
            let spec = if spec.stage == 0 { spec.with_stage(ctx.stage) } else { spec };
            Ok(Payload::Curriculum(spec))
        }
        Role::Scorer => {
            let v = block_or_field(text, "SCORE").ok_or_else(|| fail(role, "missing SCORE"))?;
            parse_score(v).map(Payload::Score).ok_or_else(|| fail(role, format!("score `{v}` is not an integer in 0..=10")))
        }
        Role::Reflector => {
            let v = block_or_field(text, "BEST_BRANCH").ok_or_else(|| fail(role, "missing BEST_BRANCH"))?;
            match v.trim().parse::<usize>() {
                Ok(i) if i < ctx.n_branches => Ok(Payload::BestBranch(i)),
                _ => Err(fail(role, format!("branch `{v}` is not an index below {}", ctx.n_branches))),
            }
        }
    }
}

impl Payload {
    /// Canonical response text that parses back to `self`.
    pub fn render(&self) -> String {
        match self {
            Payload::Plan(p) => {
                let mut s = fence("PLAN", &p.plan);
                s.push_str(&fence("REWARD_OBJECTIVE", &p.reward_objective));
                s.push_str(&fence("CURRICULUM_OBJECTIVE", &p.curriculum_objective));
                s
            }
            Payload::Analysis(AnalysisReport::Reward { terms }) => {
                let body: String = terms.iter().map(|t| format!("{} | {} | {} | {}\n", t.name, t.meaning, t.kind, t.range)).collect();
                fence("ANALYSIS", &body)
            }
            Payload::Analysis(AnalysisReport::Curriculum { verdict, assessment }) => {
                fence("ANALYSIS", &format!("verdict: {verdict}\nassessment: {assessment}\n"))
            }
            Payload::Reward(p) => fence(crate::rewardlang::BLOCK_TAG, &p.print()),
            Payload::Curriculum(c) => c.print(),
            Payload::Score(s) => format!("SCORE: {s}\n"),
            Payload::BestBranch(i) => format!("BEST_BRANCH: {i}\n"),
        }
    }

    pub fn role(&self) -> Role {
        match self {
            Payload::Plan(_) => Role::Orchestrator,
            Payload::Analysis(AnalysisReport::Reward { .. }) => Role::RewardAnalyst,
            Payload::Analysis(AnalysisReport::Curriculum { .. }) => Role::CurriculumAnalyst,
            Payload::Reward(_) => Role::RewardGenerator,
            Payload::Curriculum(_) => Role::CurriculumGenerator,
            Payload::Score(_) => Role::Scorer,
            Payload::BestBranch(_) => Role::Reflector,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenarios::overtaking;
    use alloc::vec;
    use proptest::prelude::*;

    fn ctx(ts: &TaskSet) -> ParseContext<'_> {
        ParseContext { stage: 2, task_set: ts, n_branches: 5 }
    }

    #[test]
    fn field_extraction() {
        let ts = overtaking().task_set;
        assert_eq!(parse_response(Role::Reflector, "I pick two.\nBEST_BRANCH: 2", &ctx(&ts)), Ok(Payload::BestBranch(2)));
        assert_eq!(parse_response(Role::Scorer, "SCORE: 7", &ctx(&ts)), Ok(Payload::Score(7)));
        assert_eq!(parse_response(Role::Scorer, "```SCORE\n8/10\n```", &ctx(&ts)), Ok(Payload::Score(8)));
        assert!(parse_response(Role::Scorer, "SCORE: 11", &ctx(&ts)).is_err());
        assert!(parse_response(Role::Reflector, "BEST_BRANCH: 7", &ctx(&ts)).is_err());
    }

    #[test]
    fn orchestrator_objectives() {
        let ts = overtaking().task_set;
        let t = "Thinking...\n```REWARD_OBJECTIVE\nreward lane keeping\n```\n```CURRICULUM_OBJECTIVE\nmore dense traffic\n```";
        match parse_response(Role::Orchestrator, t, &ctx(&ts)).unwrap() {
            Payload::Plan(p) => {
                assert_eq!(p.reward_objective, "reward lane keeping");
                assert_eq!(p.curriculum_objective, "more dense traffic");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_response(Role::Orchestrator, "```REWARD_OBJECTIVE\nx\n```", &ctx(&ts)).is_err());
    }

    #[test]
    fn render_parses_back_for_every_role() {
        let ts = overtaking().task_set;
        let payloads = vec![
            Payload::Plan(StagePlan {
                stage: 2,
                plan: "Focus on dense traffic.".into(),
                reward_objective: "Penalise close gaps.".into(),
                curriculum_objective: "Shift weight to high density.".into(),
            }),
            Payload::Analysis(AnalysisReport::Reward {
                terms: vec![TermProposal {
                    name: "progress".into(),
                    meaning: "distance along route".into(),
                    kind: "dense".into(),
                    range: "[0, 2]".into(),
                }],
            }),
            Payload::Analysis(AnalysisReport::Curriculum { verdict: "too easy".into(), assessment: "add density".into() }),
            Payload::Reward(crate::rewardlang::expert_program()),
            Payload::Curriculum(crate::curriculum::baseline(2)),
            Payload::Score(6),
            Payload::BestBranch(4),
        ];
        for p in payloads {
            assert_eq!(parse_response(p.role(), &p.render(), &ctx(&ts)).as_ref(), Ok(&p));
        }
    }

    proptest! {
        #[test]
        fn parsing_is_total(text in "(?s).{0,300}", tagged in "(PLAN|REWARD|CURRICULUM|SCORE|ANALYSIS|BEST_BRANCH)") {
            let ts = overtaking().task_set;
            let wrapped = format!("```{tagged}\n{text}\n```");
            for role in Role::ALL {
                let _ = parse_response(role, &text, &ctx(&ts));
                let _ = parse_response(role, &wrapped, &ctx(&ts));
            }
        }
    }
}
