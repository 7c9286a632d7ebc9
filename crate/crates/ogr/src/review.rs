//! Human review queue for observation-augmentation proposals. Decisions are
//! recorded here at any time; the stage loop applies approvals only at stage
//! boundaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use ogr_core::rewardlang::{AugmentationProposal, ObservationRegistry, ProposalStatus};
use ogr_core::sim::vars;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const QUEUE_FILE: &str = "review_queue.json";
const LOCK_FILE: &str = "review_queue.lock";

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("no pending proposal for `{0}`")]
    UnknownProposal(String),
    #[error("`{0}` is not a variable the simulator can compute")]
    NotImplementable(String),
    #[error("review queue storage: {0}")]
    Storage(String),
}

impl From<std::io::Error> for ReviewError {
    fn from(e: std::io::Error) -> Self {
        ReviewError::Storage(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuedProposal {
    pub proposal: AugmentationProposal,
    /// Stage boundary at which an approval took effect.
    pub applied_at_stage: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueue {
    pub entries: Vec<QueuedProposal>,
}

impl ReviewQueue {
    /// Adds proposals for variables not already queued.
    pub fn enqueue(&mut self, proposals: impl IntoIterator<Item = AugmentationProposal>) -> usize {
        let mut added = 0;
        for p in proposals {
            if !self.entries.iter().any(|e| e.proposal.variable == p.variable) {
                self.entries.push(QueuedProposal { proposal: p, applied_at_stage: None });
                added += 1;
            }
        }
        added
    }

    pub fn pending(&self) -> Vec<&AugmentationProposal> {
        self.entries.iter().map(|e| &e.proposal).filter(|p| p.status == ProposalStatus::Pending).collect()
    }

    fn pending_mut(&mut self, name: &str) -> Result<&mut AugmentationProposal, ReviewError> {
        self.entries
            .iter_mut()
            .map(|e| &mut e.proposal)
            .find(|p| p.variable == name && p.status == ProposalStatus::Pending)
            .ok_or_else(|| ReviewError::UnknownProposal(name.into()))
    }

    pub fn approve(&mut self, name: &str) -> Result<(), ReviewError> {
        let p = self.pending_mut(name)?;
        if vars::lookup(name).is_none() {
            return Err(ReviewError::NotImplementable(name.into()));
        }
        p.status = ProposalStatus::Approved;
        Ok(())
    }

    pub fn reject(&mut self, name: &str) -> Result<(), ReviewError> {
        self.pending_mut(name)?.status = ProposalStatus::Rejected;
        Ok(())
    }

    /// Exposes every approved, not yet applied variable in `registry`;
    /// returns the names exposed.
    pub fn apply_approved(&mut self, registry: &mut ObservationRegistry, stage: u32) -> Vec<String> {
        let mut exposed = Vec::new();
        for e in &mut self.entries {
            if e.proposal.status == ProposalStatus::Approved && e.applied_at_stage.is_none() {
                if registry.expose(&e.proposal.variable) {
                    exposed.push(e.proposal.variable.clone());
                }
                e.applied_at_stage = Some(stage);
            }
        }
        exposed
    }
}

/// Exclusive access to the queue file of a run directory.
pub struct QueueStore {
    dir: PathBuf,
}

struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl QueueStore {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn lock(&self) -> Result<Lock, ReviewError> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(LOCK_FILE);
        let start = Instant::now();
        loop {
            match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(Lock(path)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && start.elapsed() < Duration::from_secs(10) => {
                    thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(ReviewError::Storage(format!("{}: {e}", path.display()))),
            }
        }
    }

    pub fn load(&self) -> Result<ReviewQueue, ReviewError> {
        let path = self.dir.join(QUEUE_FILE);
        if !path.exists() {
            return Ok(ReviewQueue::default());
        }
        serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| ReviewError::Storage(e.to_string()))
    }

    fn save(&self, q: &ReviewQueue) -> Result<(), ReviewError> {
        let path = self.dir.join(QUEUE_FILE);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string_pretty(q).map_err(|e| ReviewError::Storage(e.to_string()))?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Loads, mutates and saves the queue under the lock.
    pub fn update<T>(&self, f: impl FnOnce(&mut ReviewQueue) -> Result<T, ReviewError>) -> Result<T, ReviewError> {
        let _lock = self.lock()?;
        let mut q = self.load()?;
        let out = f(&mut q)?;
        self.save(&q)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proposal(v: &str) -> AugmentationProposal {
        AugmentationProposal {
            variable: v.into(),
            term: "t".into(),
            stage: 1,
            justification: String::new(),
            status: ProposalStatus::Pending,
        }
    }

    #[test]
    fn approve_exposes_at_boundary() {
        let mut q = ReviewQueue::default();
        assert!(q.pending().is_empty());
        q.enqueue([proposal("ttc_front"), proposal("ttc_front")]);
        assert_eq!(q.pending().len(), 1);
        let mut reg = ObservationRegistry::initial();
        q.approve("ttc_front").unwrap();
        assert!(!reg.contains("ttc_front"));
        assert_eq!(q.apply_approved(&mut reg, 2), vec!["ttc_front".to_string()]);
        assert_eq!(reg.version, 2);
        assert!(reg.contains("ttc_front"));
        assert!(q.apply_approved(&mut reg, 3).is_empty());
        assert_eq!(reg.version, 2);
    }

    #[test]
    fn reject_closes_without_registry_change() {
        let mut q = ReviewQueue::default();
        q.enqueue([proposal("gap_front")]);
        q.reject("gap_front").unwrap();
        let mut reg = ObservationRegistry::initial();
        assert!(q.apply_approved(&mut reg, 2).is_empty());
        assert_eq!(reg, ObservationRegistry::initial());
        assert!(matches!(q.reject("gap_front"), Err(ReviewError::UnknownProposal(_))));
    }

    #[test]
    fn errors() {
        let mut q = ReviewQueue::default();
        assert!(matches!(q.approve("ttc_front"), Err(ReviewError::UnknownProposal(_))));
        q.enqueue([proposal("warp_factor")]);
        assert!(matches!(q.approve("warp_factor"), Err(ReviewError::NotImplementable(_))));
        assert_eq!(q.pending().len(), 1);
    }

    #[test]
    fn store_persists_decisions() {
        let d = tempfile::tempdir().unwrap();
        let s = QueueStore::new(d.path());
        assert_eq!(s.load().unwrap(), ReviewQueue::default());
        s.update(|q| Ok(q.enqueue([proposal("ttc_front")]))).unwrap();
        s.update(|q| q.approve("ttc_front")).unwrap();
        assert_eq!(s.load().unwrap().entries[0].proposal.status, ProposalStatus::Approved);
        assert!(!d.path().join(LOCK_FILE).exists());
    }
}
