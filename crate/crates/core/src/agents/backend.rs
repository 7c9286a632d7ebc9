//! Backend abstraction, bounded retries and the scripted offline stub.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::sync::atomic::{AtomicUsize, Ordering};

use super::{AgentError, PromptBundle, Role};

/// Attempts per invocation before giving up.
pub const RETRY_BUDGET: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    Transport(String),
    Timeout,
}

/// A chat-style text completion endpoint.
pub trait Backend: Sync {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, BackendError>;

    fn max_attachments(&self) -> usize {
        16
    }
}

/// Receives every successful (prompt, response) exchange.
pub trait DialogueSink {
    fn record(&self, bundle: &PromptBundle, response: &str);
}

impl DialogueSink for () {
    fn record(&self, _: &PromptBundle, _: &str) {}
}

/// Sends `bundle`, retrying transport failures, timeouts and empty replies up
/// to `RETRY_BUDGET` attempts in total. Returns the response verbatim.
pub fn invoke(backend: &dyn Backend, bundle: &PromptBundle, sink: &dyn DialogueSink) -> Result<String, AgentError> {
    let limit = backend.max_attachments();
    if bundle.attachments.len() > limit {
        return Err(AgentError::AttachmentLimit { got: bundle.attachments.len(), limit });
    }
    let mut last = AgentError::BackendError("no attempt made".into());
    for _ in 0..RETRY_BUDGET {
        match backend.complete(bundle) {
            Ok(text) if text.is_empty() => last = AgentError::BackendError("empty response".into()),
            Ok(text) => {
                sink.record(bundle, &text);
                return Ok(text);
            }
            Err(BackendError::Timeout) => last = AgentError::BackendTimeout(RETRY_BUDGET),
            Err(BackendError::Transport(m)) => last = AgentError::BackendError(m),
        }
    }
    Err(last)
}

/// Offline backend answering from a table keyed by (role, stage, branch).
///
/// Lookup falls back from the exact key to any branch of that stage, then to
/// stage 0, which stands for every stage.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: BTreeMap<(Role, u32, Option<usize>), String>,
    fail_next: AtomicUsize,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, role: Role, stage: u32, branch: Option<usize>, text: impl Into<String>) {
        self.script.insert((role, stage, branch), text.into());
    }

    pub fn with(mut self, role: Role, stage: u32, branch: Option<usize>, text: impl Into<String>) -> Self {
        self.insert(role, stage, branch, text);
        self
    }

    /// The next `n` calls fail with a transport error.
    pub fn fail_next(&self, n: usize) {
        self.fail_next.store(n, Ordering::SeqCst);
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn lookup(&self, role: Role, stage: u32, branch: Option<usize>) -> Option<&str> {
        let keys = [(stage, branch), (stage, None), (0, branch), (0, None)];
        keys.iter().find_map(|&(s, b)| self.script.get(&(role, s, b))).map(|s| s.as_str())
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let failing = self.fail_next.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1)).is_ok();
        if failing {
            return Err(BackendError::Transport("scripted failure".into()));
        }
        Ok(self.lookup(bundle.role, bundle.stage, bundle.branch).unwrap_or_default().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::cell::RefCell;

    fn bundle(role: Role, stage: u32, branch: Option<usize>) -> PromptBundle {
        PromptBundle { role, stage, branch, system: "s".into(), user: "u".into(), attachments: Vec::new() }
    }

    #[derive(Default)]
    struct Log(RefCell<Vec<String>>);
    impl DialogueSink for Log {
        fn record(&self, _: &PromptBundle, response: &str) {
            self.0.borrow_mut().push(response.to_string());
        }
    }

    #[test]
    fn scripted_text_is_returned_exactly() {
        let b = ScriptedBackend::new().with(Role::Scorer, 0, None, "SCORE: 5").with(Role::Scorer, 2, Some(1), "SCORE: 9\n");
        let log = Log::default();
        assert_eq!(invoke(&b, &bundle(Role::Scorer, 2, Some(1)), &log).unwrap(), "SCORE: 9\n");
        assert_eq!(invoke(&b, &bundle(Role::Scorer, 2, Some(0)), &log).unwrap(), "SCORE: 5");
        assert_eq!(*log.0.borrow(), ["SCORE: 9\n", "SCORE: 5"]);
    }

    #[test]
    fn retries_within_budget() {
        let b = ScriptedBackend::new().with(Role::Reflector, 0, None, "BEST_BRANCH: 0");
        b.fail_next(2);
        assert_eq!(invoke(&b, &bundle(Role::Reflector, 1, None), &()).unwrap(), "BEST_BRANCH: 0");
        assert_eq!(b.calls(), 3);
        b.fail_next(3);
        assert!(matches!(invoke(&b, &bundle(Role::Reflector, 1, None), &()), Err(AgentError::BackendError(_))));
    }

    #[test]
    fn empty_response_is_an_error() {
        let b = ScriptedBackend::new();
        assert_eq!(invoke(&b, &bundle(Role::Scorer, 1, None), &()), Err(AgentError::BackendError("empty response".into())));
    }

    #[test]
    fn attachment_cap() {
        let b = ScriptedBackend::new();
        let mut bd = bundle(Role::Scorer, 2, None);
        bd.attachments = (0..17)
            .map(|i| super::super::Attachment { name: alloc::format!("c{i}"), media_type: "text/plain".into(), body: String::new() })
            .collect();
        assert_eq!(invoke(&b, &bd, &()), Err(AgentError::AttachmentLimit { got: 17, limit: 16 }));
    }
}
