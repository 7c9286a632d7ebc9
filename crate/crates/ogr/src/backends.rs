//! Backends: a directory of scripted responses, and a chat-completions
//! endpoint configured from the environment.

use std::path::{Path, PathBuf};
use std::time::Duration;

use ogr_core::agents::{Backend, BackendError, PromptBundle};
use serde_json::{json, Value};

use crate::config::{BackendChoice, ConfigError};

pub const ENV_URL: &str = "OGR_BACKEND_URL";
pub const ENV_KEY: &str = "OGR_BACKEND_KEY";
pub const ENV_MODEL: &str = "OGR_BACKEND_MODEL";

/// Scripted responses read from `<role>_s<stage>_b<branch>.txt`, falling back
/// to `<role>_s<stage>.txt`, `<role>_b<branch>.txt` and `<role>.txt`.
#[derive(Debug, Clone)]
pub struct StubDir {
    dir: PathBuf,
}

impl StubDir {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(ConfigError::Missing(dir));
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Candidate file names, most specific first.
    pub fn candidates(role: &str, stage: u32, branch: Option<usize>) -> Vec<String> {
        let mut v = Vec::with_capacity(4);
        if let Some(b) = branch {
            v.push(format!("{role}_s{stage}_b{b}.txt"));
        }
        v.push(format!("{role}_s{stage}.txt"));
        if let Some(b) = branch {
            v.push(format!("{role}_b{b}.txt"));
        }
        v.push(format!("{role}.txt"));
        v
    }
}

impl Backend for StubDir {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        for name in Self::candidates(bundle.role.name(), bundle.stage, bundle.branch) {
            let path = self.dir.join(&name);
            if path.is_file() {
                return std::fs::read_to_string(&path).map_err(|e| BackendError::Transport(format!("{name}: {e}")));
            }
        }
        Err(BackendError::Transport(format!("no stub response for {} at stage {}", bundle.role, bundle.stage)))
    }
}

/// Chat-completions endpoint. Attachments travel as extra text parts.
pub struct Remote {
    url: String,
    key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl Remote {
    pub fn from_env() -> Result<Self, ConfigError> {
        let url = std::env::var(ENV_URL).map_err(|_| ConfigError::Backend(format!("{ENV_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| ConfigError::Backend(format!("{ENV_MODEL} is not set")))?;
        Ok(Self::new(url, std::env::var(ENV_KEY).ok(), model, Duration::from_secs(300)))
    }

    pub fn new(url: String, key: Option<String>, model: String, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { url, key, model, agent }
    }

    pub fn request_body(&self, bundle: &PromptBundle) -> Value {
        let mut user = vec![json!({"type": "text", "text": bundle.user})];
        for a in &bundle.attachments {
            user.push(json!({"type": "text", "text": format!("[attachment {} {}]\n{}", a.name, a.media_type, a.body)}));
        }
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": bundle.system},
                {"role": "user", "content": user},
            ],
        })
    }
}

impl Backend for Remote {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.url);
        if let Some(k) = &self.key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(self.request_body(bundle)).map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            e => BackendError::Transport(e.to_string()),
        })?;
        let v: Value = resp.body_mut().read_json().map_err(|e| BackendError::Transport(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Transport("response has no choices[0].message.content".into()))
    }
}

pub fn make_backend(choice: &BackendChoice) -> Result<Box<dyn Backend>, ConfigError> {
    Ok(match choice {
        BackendChoice::Remote => Box::new(Remote::from_env()?),
        BackendChoice::Stub(dir) => Box::new(StubDir::new(dir)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ogr_core::agents::{Attachment, Role};

    fn bundle(role: Role, stage: u32, branch: Option<usize>) -> PromptBundle {
        PromptBundle { role, stage, branch, system: "s".into(), user: "u".into(), attachments: vec![] }
    }

    #[test]
    fn stub_prefers_specific_files() {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(d.path().join("scorer.txt"), "SCORE: 1").unwrap();
        std::fs::write(d.path().join("scorer_b2.txt"), "SCORE: 2").unwrap();
        std::fs::write(d.path().join("scorer_s3.txt"), "SCORE: 3").unwrap();
        std::fs::write(d.path().join("scorer_s3_b2.txt"), "SCORE: 4").unwrap();
        let s = StubDir::new(d.path()).unwrap();
        assert_eq!(s.complete(&bundle(Role::Scorer, 3, Some(2))).unwrap(), "SCORE: 4");
        assert_eq!(s.complete(&bundle(Role::Scorer, 3, Some(1))).unwrap(), "SCORE: 3");
        assert_eq!(s.complete(&bundle(Role::Scorer, 1, Some(2))).unwrap(), "SCORE: 2");
        assert_eq!(s.complete(&bundle(Role::Scorer, 1, None)).unwrap(), "SCORE: 1");
        assert!(s.complete(&bundle(Role::Reflector, 1, None)).is_err());
        assert!(StubDir::new(d.path().join("nope")).is_err());
    }

    #[test]
    fn remote_body_carries_attachments() {
        let r = Remote::new("http://localhost:9".into(), None, "m".into(), Duration::from_millis(10));
        let mut b = bundle(Role::Scorer, 2, Some(0));
        b.attachments.push(Attachment { name: "clip".into(), media_type: "application/json".into(), body: "{}".into() });
        let v = r.request_body(&b);
        assert_eq!(v["messages"][0]["content"], "s");
        assert_eq!(v["messages"][1]["content"].as_array().unwrap().len(), 2);
        assert!(r.complete(&b).is_err());
    }
}
