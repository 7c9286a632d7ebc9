//! Record kinds and the payload bodies stored in the memory log, with the
//! canonical parser each kind must satisfy.

use ogr_core::agents::{parse_response, ParseContext, PromptBundle, Role};
use ogr_core::curriculum::TaskId;
use ogr_core::rewardlang::{AugmentationProposal, ObservationRegistry};
use ogr_core::sim::Status;
use ogr_core::train::TestReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Dialogue,
    StagePlan,
    Analysis,
    RewardProgram,
    CurriculumSpec,
    Proposal,
    TestReport,
    Clip,
    Score,
    Selection,
    CheckpointRef,
    Registry,
    StageSummary,
}

impl Kind {
    pub const ALL: [Kind; 13] = [
        Kind::Dialogue,
        Kind::StagePlan,
        Kind::Analysis,
        Kind::RewardProgram,
        Kind::CurriculumSpec,
        Kind::Proposal,
        Kind::TestReport,
        Kind::Clip,
        Kind::Score,
        Kind::Selection,
        Kind::CheckpointRef,
        Kind::Registry,
        Kind::StageSummary,
    ];

    /// Role whose response parser produces this kind, if any.
    pub fn parser_role(self, role: Option<Role>) -> Option<Role> {
        match self {
            Kind::StagePlan => Some(Role::Orchestrator),
            Kind::Analysis => role.filter(|r| matches!(r, Role::RewardAnalyst | Role::CurriculumAnalyst)),
            Kind::RewardProgram => Some(Role::RewardGenerator),
            Kind::CurriculumSpec => Some(Role::CurriculumGenerator),
            Kind::Score => Some(Role::Scorer),
            Kind::Selection => Some(Role::Reflector),
            _ => None,
        }
    }
}

/// One backend exchange, verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialoguePayload {
    pub prompt: PromptBundle,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub branch: usize,
    pub task: TaskId,
    pub report: TestReport,
}

/// Pointer to a clip stored in the sidecar directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipRef {
    pub hash: String,
    pub branch: usize,
    pub episode: usize,
    pub task: TaskId,
    pub outcome: Status,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRef {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub branch: usize,
    pub winner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub branch: usize,
    pub sr: f64,
    pub cr: f64,
    pub tor: f64,
    pub scores: Vec<u8>,
    pub mean_score: f64,
    pub generation_fallback: bool,
    pub proposals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: u32,
    pub winner: usize,
    pub reflector_fallback: bool,
    /// Every branch failed generation and reused the previous stage's pair.
    pub aborted_generation: bool,
    pub registry_version: u32,
    pub branches: Vec<BranchSummary>,
    pub checkpoint: String,
}

impl StageSummary {
    /// Structured text for the terminal and for orchestrator prompts.
    pub fn render(&self) -> String {
        let mut s = format!(
            "stage {} winner {}{} registry v{}\n",
            self.stage,
            self.winner,
            if self.reflector_fallback { " (fallback)" } else { "" },
            self.registry_version
        );
        for b in &self.branches {
            s.push_str(&format!(
                "  branch {} SR {:.2} CR {:.2} TOR {:.2} score {:.2}{}\n",
                b.branch,
                b.sr,
                b.cr,
                b.tor,
                b.mean_score,
                if b.generation_fallback { " reused-pair" } else { "" }
            ));
        }
        s
    }
}

fn json_roundtrip<T: Serialize + DeserializeOwned>(payload: &str) -> Result<(), String> {
    let v: T = serde_json::from_str(payload).map_err(|e| e.to_string())?;
    let again = serde_json::to_string(&v).map_err(|e| e.to_string())?;
    if again == payload {
        Ok(())
    } else {
        Err("payload is not in canonical form".into())
    }
}

/// Checks that `payload` parses under the canonical parser of `kind` and
/// prints back to the same bytes.
pub fn check_payload(kind: Kind, role: Option<Role>, payload: &str, ctx: &ParseContext<'_>) -> Result<(), String> {
    if let Some(r) = kind.parser_role(role) {
        let parsed = parse_response(r, payload, ctx).map_err(|e| e.to_string())?;
        return if parsed.render() == payload { Ok(()) } else { Err(format!("{kind:?} payload does not print back identically")) };
    }
    match kind {
        Kind::Dialogue => json_roundtrip::<DialoguePayload>(payload),
        Kind::Proposal => json_roundtrip::<AugmentationProposal>(payload),
        Kind::TestReport => json_roundtrip::<TestRecord>(payload),
        Kind::Clip => json_roundtrip::<ClipRef>(payload),
        Kind::CheckpointRef => json_roundtrip::<CheckpointRef>(payload),
        Kind::Registry => json_roundtrip::<ObservationRegistry>(payload),
        Kind::StageSummary => json_roundtrip::<StageSummary>(payload),
        Kind::Analysis => Err("analysis records need an analyst role".into()),
        _ => unreachable!("parser-backed kinds handled above"),
    }
}

/// Canonical JSON body.
pub fn to_payload<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("record bodies serialize")
}
