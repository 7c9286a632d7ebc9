#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use ogr::backends::StubDir;
use ogr::config::{scenario_to_toml, Profile, RunConfig};
use ogr_core::agents::{Backend, BackendError, PromptBundle, Role};
use ogr_core::geom::Polygon;
use ogr_core::sim::scenarios::overtaking;

pub fn stub_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("stub")
}

type Hook = dyn Fn(&PromptBundle) -> Option<Result<String, BackendError>> + Sync;

/// Stub corpus with per-call overrides; records every call.
pub struct Scripted {
    stub: StubDir,
    hook: Box<Hook>,
    pub calls: Mutex<Vec<(Role, u32, Option<usize>)>>,
}

impl Scripted {
    pub fn new(hook: impl Fn(&PromptBundle) -> Option<Result<String, BackendError>> + Sync + 'static) -> Self {
        Self { stub: StubDir::new(stub_dir()).unwrap(), hook: Box::new(hook), calls: Mutex::new(Vec::new()) }
    }

    pub fn plain() -> Self {
        Self::new(|_| None)
    }

    pub fn count(&self, role: Role, stage: u32) -> usize {
        self.calls.lock().unwrap().iter().filter(|c| c.0 == role && c.1 == stage).count()
    }
}

impl Backend for Scripted {
    fn complete(&self, b: &PromptBundle) -> Result<String, BackendError> {
        self.calls.lock().unwrap().push((b.role, b.stage, b.branch));
        (self.hook)(b).unwrap_or_else(|| self.stub.complete(b))
    }
}

/// Overtaking road whose goal starts just past the ego spawn, so test
/// episodes last a few dozen steps and end in success.
pub fn short_scenario(dir: &Path) -> PathBuf {
    let mut sc = overtaking();
    sc.name = "short".into();
    Arc::make_mut(&mut sc.worlds[0]).goal = Polygon::rect(20.0, -2.0, 60.0, 10.0);
    let path = dir.join("short.toml");
    std::fs::write(&path, scenario_to_toml(&sc).unwrap()).unwrap();
    path
}

/// A few-second run configuration in `dir`.
pub fn tiny_config(dir: &Path, n_g: usize, stages: u32) -> RunConfig {
    let mut cfg = RunConfig::profile(Profile::Desk);
    cfg.scenario = short_scenario(dir).display().to_string();
    cfg.backend = format!("stub:{}", stub_dir().display());
    cfg.out = dir.join("run");
    cfg.stages = stages;
    cfg.n_g = n_g;
    cfg.n_s = 2;
    cfg.n_test = 3;
    cfg.episodes_per_stage = 20;
    cfg.curriculum_refreshes = 2;
    cfg.train.hidden = vec![16, 16];
    cfg.train.ppo.epochs = 2;
    cfg
}
