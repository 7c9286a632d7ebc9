//! Prompt assembly, backend invocation and response parsing for the seven
//! agent roles.

mod backend;
mod parse;

pub use backend::{invoke, Backend, BackendError, DialogueSink, ScriptedBackend, RETRY_BUDGET};
pub use parse::{parse_response, AnalysisReport, ParseContext, Payload, StagePlan, TermProposal, MAX_SCORE};

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Orchestrator,
    RewardAnalyst,
    CurriculumAnalyst,
    RewardGenerator,
    CurriculumGenerator,
    Scorer,
    Reflector,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Orchestrator,
        Role::RewardAnalyst,
        Role::CurriculumAnalyst,
        Role::RewardGenerator,
        Role::CurriculumGenerator,
        Role::Scorer,
        Role::Reflector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::Orchestrator => "orchestrator",
            Role::RewardAnalyst => "reward_analyst",
            Role::CurriculumAnalyst => "curriculum_analyst",
            Role::RewardGenerator => "reward_generator",
            Role::CurriculumGenerator => "curriculum_generator",
            Role::Scorer => "scorer",
            Role::Reflector => "reflector",
        }
    }

    pub fn from_name(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.name() == s)
    }

    /// Built-in template text.
    pub fn default_template(self) -> &'static str {
        match self {
            Role::Orchestrator => include_str!("../../templates/orchestrator.txt"),
            Role::RewardAnalyst => include_str!("../../templates/reward_analyst.txt"),
            Role::CurriculumAnalyst => include_str!("../../templates/curriculum_analyst.txt"),
            Role::RewardGenerator => include_str!("../../templates/reward_generator.txt"),
            Role::CurriculumGenerator => include_str!("../../templates/curriculum_generator.txt"),
            Role::Scorer => include_str!("../../templates/scorer.txt"),
            Role::Reflector => include_str!("../../templates/reflector.txt"),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("missing prompt context `{0}`")]
    MissingContext(String),
    #[error("template for {0} has no `---` separator between system and user text")]
    BadTemplate(Role),
    #[error("backend timed out after {0} attempts")]
    BackendTimeout(usize),
    #[error("backend error: {0}")]
    BackendError(String),
    #[error("{got} attachments exceed the backend limit of {limit}")]
    AttachmentLimit { got: usize, limit: usize },
    #[error("cannot parse {role} response: {message}")]
    ParseFailure { role: Role, message: String },
}

/// System/user template pair for one role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub system: String,
    pub user: String,
}

impl Template {
    pub fn parse(role: Role, text: &str) -> Result<Self, AgentError> {
        let mut system = String::new();
        let mut user = String::new();
        let mut seen = false;
        for line in text.split_inclusive('\n') {
            if !seen && line.trim_end() == "---" {
                seen = true;
            } else if seen {
                user.push_str(line);
            } else {
                system.push_str(line);
            }
        }
        if !seen {
            return Err(AgentError::BadTemplate(role));
        }
        Ok(Self { system: system.trim_end().to_string(), user })
    }

    pub fn builtin(role: Role) -> Self {
        Self::parse(role, role.default_template()).expect("built-in templates are well formed")
    }

    /// Placeholder names used by the user text, in order of first use.
    pub fn placeholders(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for name in placeholders(&self.user).into_iter().chain(placeholders(&self.system)) {
            if !out.iter().any(|n| *n == name) {
                out.push(name.to_string());
            }
        }
        out
    }
}

fn placeholders(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find('{') {
        let after = &rest[i + 1..];
        match after.find('}') {
            Some(j) if j > 0 && after[..j].bytes().all(|b| b.is_ascii_lowercase() || b == b'_') => {
                out.push(&after[..j]);
                rest = &after[j + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

/// Replaces every `{name}` with its value; unknown names are `MissingContext`.
pub fn fill(text: &str, values: &BTreeMap<String, String>) -> Result<String, AgentError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        match after.find('}') {
            Some(j) if j > 0 && after[..j].bytes().all(|b| b.is_ascii_lowercase() || b == b'_') => {
                let name = &after[..j];
                let v = values.get(name).ok_or_else(|| AgentError::MissingContext(name.to_string()))?;
                out.push_str(v);
                rest = &after[j + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Non-text context passed to the backend, e.g. a serialised rollout clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    pub media_type: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role: Role,
    pub stage: u32,
    pub branch: Option<usize>,
    pub system: String,
    pub user: String,
    pub attachments: Vec<Attachment>,
}

impl PromptBundle {
    /// Single-string rendering used for logs and text-only backends.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("[system]\n");
        s.push_str(&self.system);
        s.push_str("\n[user]\n");
        s.push_str(&self.user);
        for a in &self.attachments {
            s.push_str("\n[attachment ");
            s.push_str(&a.name);
            s.push_str(" ");
            s.push_str(&a.media_type);
            s.push_str("]\n");
            s.push_str(&a.body);
        }
        s
    }
}

/// One earlier prompt/response exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub branch: Option<usize>,
    pub prompt: String,
    pub response: String,
}

/// Read access to earlier dialogue rounds.
pub trait HistorySource {
    /// Dialogue of `role` from stage `stage - 1`, in append order.
    fn history(&self, role: Role, stage: u32) -> Vec<Exchange>;
}

/// No memory at all.
pub struct NoHistory;

impl HistorySource for NoHistory {
    fn history(&self, _: Role, _: u32) -> Vec<Exchange> {
        Vec::new()
    }
}

/// Named text fields plus attachments for one prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptInputs {
    pub fields: BTreeMap<String, String>,
    pub attachments: Vec<Attachment>,
    pub branch: Option<usize>,
}

impl PromptInputs {
    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.fields.insert(key.to_string(), value.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.fields.insert(key.to_string(), value.into());
    }
}

/// Delimiters around the history section of a filled prompt.
pub const HISTORY_BEGIN: &str = "[previous round begin]";
pub const HISTORY_END: &str = "[previous round end]";

/// `prompt` with its embedded history section collapsed, so that replaying a
/// prompt as history does not nest every earlier round inside it.
pub fn strip_history(prompt: &str) -> String {
    match (prompt.find(HISTORY_BEGIN), prompt.rfind(HISTORY_END)) {
        (Some(b), Some(e)) if e > b => {
            let mut s = String::with_capacity(prompt.len());
            s.push_str(&prompt[..b]);
            s.push_str("(earlier rounds omitted)");
            s.push_str(&prompt[e + HISTORY_END.len()..]);
            s
        }
        _ => prompt.to_string(),
    }
}

fn format_history(h: &[Exchange]) -> String {
    if h.is_empty() {
        return "(none)".to_string();
    }
    let mut s = String::from(HISTORY_BEGIN);
    s.push('\n');
    for (i, e) in h.iter().enumerate() {
        if let Some(b) = e.branch {
            s.push_str(&alloc::format!("--- exchange {} (branch {b}) ---\n", i + 1));
        } else {
            s.push_str(&alloc::format!("--- exchange {} ---\n", i + 1));
        }
        s.push_str("PROMPT:\n");
        s.push_str(&e.prompt);
        s.push_str("\nRESPONSE:\n");
        s.push_str(&e.response);
        s.push('\n');
    }
    s.push_str(HISTORY_END);
    s
}

/// Assembles the prompt for `role` at `stage`. `stage` and `history` fill
/// themselves; everything else the template names must be in `inputs`.
/// Stage 1 prompts never carry attachments.
pub fn build_prompt(
    role: Role,
    stage: u32,
    template: &Template,
    mem: &dyn HistorySource,
    inputs: &PromptInputs,
) -> Result<PromptBundle, AgentError> {
    if stage == 0 {
        return Err(AgentError::MissingContext("stage".into()));
    }
    let mut values = inputs.fields.clone();
    values.insert("stage".into(), stage.to_string());
    if template.placeholders().iter().any(|p| p == "history") {
        let h = if stage >= 2 { mem.history(role, stage) } else { Vec::new() };
        values.insert("history".into(), format_history(&h));
    }
    Ok(PromptBundle {
        role,
        stage,
        branch: inputs.branch,
        system: fill(&template.system, &values)?,
        user: fill(&template.user, &values)?,
        attachments: if stage == 1 { Vec::new() } else { inputs.attachments.clone() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    struct OneRound(Vec<(Role, u32, Exchange)>);

    impl HistorySource for OneRound {
        fn history(&self, role: Role, stage: u32) -> Vec<Exchange> {
            self.0.iter().filter(|(r, s, _)| *r == role && *s + 1 == stage).map(|e| e.2.clone()).collect()
        }
    }

    fn full_inputs(role: Role) -> PromptInputs {
        let mut inp = PromptInputs::default();
        for p in Template::builtin(role).placeholders() {
            inp.set(&p, alloc::format!("<{p}>"));
        }
        inp.attachments.push(Attachment { name: "clip0".into(), media_type: "text/plain".into(), body: "frames".into() });
        inp
    }

    #[test]
    fn every_role_has_a_template() {
        for r in Role::ALL {
            let t = Template::builtin(r);
            assert!(!t.system.is_empty() && !t.user.is_empty());
            assert_eq!(Role::from_name(r.name()), Some(r));
        }
    }

    #[test]
    fn stage_one_has_no_attachments() {
        for r in Role::ALL {
            let b = build_prompt(r, 1, &Template::builtin(r), &NoHistory, &full_inputs(r)).unwrap();
            assert!(b.attachments.is_empty());
            let b2 = build_prompt(r, 2, &Template::builtin(r), &NoHistory, &full_inputs(r)).unwrap();
            assert_eq!(b2.attachments.len(), 1);
        }
    }

    #[test]
    fn previous_round_is_embedded() {
        let mem = OneRound(vec![
            (Role::RewardGenerator, 2, Exchange { branch: Some(1), prompt: "P2".into(), response: "R2".into() }),
            (Role::RewardGenerator, 1, Exchange { branch: Some(0), prompt: "P1".into(), response: "R1".into() }),
            (Role::Scorer, 2, Exchange { branch: None, prompt: "S".into(), response: "7".into() }),
        ]);
        let r = Role::RewardGenerator;
        let b = build_prompt(r, 3, &Template::builtin(r), &mem, &full_inputs(r)).unwrap();
        assert!(b.user.contains("P2") && b.user.contains("R2"));
        assert!(!b.user.contains("R1"));
    }

    #[test]
    fn reward_analyst_carries_trajectories() {
        let r = Role::RewardAnalyst;
        let inp = full_inputs(r).with("reward_trajectory", "window 1: total 3.2 progress 2.0 crash -1.0");
        let b = build_prompt(r, 2, &Template::builtin(r), &NoHistory, &inp).unwrap();
        assert!(b.user.contains("progress 2.0"));
        let cr = Role::CurriculumAnalyst;
        let b = build_prompt(cr, 2, &Template::builtin(cr), &NoHistory, &full_inputs(cr).with("outcome_history", "SR 0.4")).unwrap();
        assert!(b.user.contains("SR 0.4"));
    }

    #[test]
    fn missing_context_is_named() {
        let r = Role::RewardAnalyst;
        let mut inp = full_inputs(r);
        inp.fields.remove("reward_trajectory");
        assert_eq!(
            build_prompt(r, 2, &Template::builtin(r), &NoHistory, &inp),
            Err(AgentError::MissingContext("reward_trajectory".into()))
        );
    }

    #[test]
    fn prompts_are_deterministic() {
        for r in Role::ALL {
            let a = build_prompt(r, 2, &Template::builtin(r), &NoHistory, &full_inputs(r)).unwrap();
            let b = build_prompt(r, 2, &Template::builtin(r), &NoHistory, &full_inputs(r)).unwrap();
            assert_eq!(a.render(), b.render());
        }
    }

    #[test]
    fn fill_leaves_other_braces() {
        let mut v = BTreeMap::new();
        v.insert("a".to_string(), "1".to_string());
        assert_eq!(fill("{a} {} {X} {", &v).unwrap(), "1 {} {X} {");
    }

    #[test]
    fn history_does_not_nest() {
        let r = Role::Reflector;
        let first = Exchange { branch: None, prompt: "p1".into(), response: "BEST_BRANCH: 0".into() };
        let mem = OneRound(vec![(r, 1, first)]);
        let p2 = build_prompt(r, 2, &Template::builtin(r), &mem, &full_inputs(r)).unwrap().render();
        assert!(p2.contains("BEST_BRANCH: 0") && p2.contains(HISTORY_BEGIN));
        let stripped = strip_history(&p2);
        assert!(!stripped.contains("BEST_BRANCH: 0"));
        assert!(stripped.contains("(earlier rounds omitted)"));
        assert_eq!(strip_history("no history here"), "no history here");
    }
}
