//! Run configuration: a TOML file layered over a named profile, then over
//! command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use ogr_core::sim::Scenario;
use ogr_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::sha256_hex;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Bounds { field: &'static str, message: String },
    #[error("missing file or directory: {0}")]
    Missing(PathBuf),
    #[error("backend: {0}")]
    Backend(String),
    #[error("scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Full,
    Desk,
}

/// Where agent responses come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Remote,
    Stub(PathBuf),
}

impl BackendChoice {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "remote" => Ok(Self::Remote),
            _ => match s.strip_prefix("stub:") {
                Some(dir) if !dir.is_empty() => Ok(Self::Stub(PathBuf::from(dir))),
                _ => Err(ConfigError::Backend(format!("expected `remote` or `stub:DIR`, got `{s}`"))),
            },
        }
    }

    pub fn to_config_string(&self) -> String {
        match self {
            Self::Remote => "remote".into(),
            Self::Stub(p) => format!("stub:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    /// Built-in scenario name or path to a scenario TOML file.
    pub scenario: String,
    /// `remote` or `stub:DIR`.
    pub backend: String,
    pub seed: u64,
    pub stages: u32,
    pub episodes_per_stage: usize,
    /// Curriculum generations per stage, the first included.
    pub curriculum_refreshes: usize,
    pub n_g: usize,
    pub n_s: usize,
    pub n_test: usize,
    pub eval_per_density: usize,
    pub goal: String,
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    pub train: TrainConfig,
}

pub const DEFAULT_GOAL: &str = "Drive the ego vehicle to the goal region quickly while avoiding collisions with surrounding traffic.";

impl RunConfig {
    pub fn profile(p: Profile) -> Self {
        let full = Self {
            profile: p,
            scenario: "overtaking".into(),
            backend: "remote".into(),
            seed: 0,
            stages: 5,
            episodes_per_stage: 1000,
            curriculum_refreshes: 10,
            n_g: 5,
            n_s: 4,
            n_test: 20,
            eval_per_density: 100,
            goal: DEFAULT_GOAL.into(),
            out: PathBuf::from("runs/latest"),
            templates: None,
            train: TrainConfig::default(),
        };
        match p {
            Profile::Full => full,
            Profile::Desk => Self { episodes_per_stage: 150, curriculum_refreshes: 5, n_g: 3, n_test: 10, ..full },
        }
    }

    /// Parses TOML text. `profile` in the text, or `profile_override`,
    /// selects the defaults the text is layered over. Relative paths resolve
    /// against `base`.
    pub fn from_toml(text: &str, base: &Path, profile_override: Option<Profile>) -> Result<Self, ConfigError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let named = match table.get("profile") {
            Some(v) => Some(Profile::deserialize(v.clone()).map_err(|e| ConfigError::Parse(e.to_string()))?),
            None => None,
        };
        let profile = profile_override.or(named).unwrap_or(Profile::Full);
        let mut merged = toml::Table::try_from(Self::profile(profile)).map_err(|e| ConfigError::Parse(e.to_string()))?;
        merge(&mut merged, table);
        merged.insert("profile".into(), toml::Value::try_from(profile).map_err(|e| ConfigError::Parse(e.to_string()))?);
        let mut cfg = Self::deserialize(merged).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path, profile_override: Option<Profile>) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.into(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base, profile_override)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        if Scenario::by_name(&self.scenario).is_none() {
            self.scenario = join(Path::new(&self.scenario)).display().to_string();
        }
        if let Ok(BackendChoice::Stub(dir)) = BackendChoice::parse(&self.backend) {
            self.backend = BackendChoice::Stub(join(&dir)).to_config_string();
        }
        self.out = join(&self.out);
        self.templates = self.templates.as_deref().map(join);
    }

    pub fn backend_choice(&self) -> Result<BackendChoice, ConfigError> {
        BackendChoice::parse(&self.backend)
    }

    /// Checks numeric bounds and that referenced paths exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bound(field: &'static str, v: usize, lo: usize, hi: usize) -> Result<(), ConfigError> {
            if v < lo || v > hi {
                return Err(ConfigError::Bounds { field, message: format!("{v} outside [{lo}, {hi}]") });
            }
            Ok(())
        }
        bound("stages", self.stages as usize, 1, 100)?;
        bound("episodes_per_stage", self.episodes_per_stage, 1, 10_000_000)?;
        bound("curriculum_refreshes", self.curriculum_refreshes, 1, self.episodes_per_stage)?;
        bound("n_g", self.n_g, 1, 16)?;
        bound("n_s", self.n_s, 0, 16)?;
        bound("n_test", self.n_test, 1, 100_000)?;
        bound("eval_per_density", self.eval_per_density, 1, 100_000)?;
        bound("train.action_repeat", self.train.action_repeat, 1, 100)?;
        bound("train.episodes_per_update", self.train.episodes_per_update, 1, 100_000)?;
        if self.train.hidden.is_empty() || self.train.hidden.contains(&0) {
            return Err(ConfigError::Bounds { field: "train.hidden", message: "need positive layer widths".into() });
        }
        self.train.ppo.validate().map_err(|e| ConfigError::Bounds { field: "train.ppo", message: e.to_string() })?;
        if self.goal.trim().is_empty() {
            return Err(ConfigError::Bounds { field: "goal", message: "empty".into() });
        }
        if Scenario::by_name(&self.scenario).is_none() && !Path::new(&self.scenario).is_file() {
            return Err(ConfigError::Missing(PathBuf::from(&self.scenario)));
        }
        if let BackendChoice::Stub(dir) = self.backend_choice()? {
            if !dir.is_dir() {
                return Err(ConfigError::Missing(dir));
            }
        }
        if let Some(t) = &self.templates {
            if !t.is_dir() {
                return Err(ConfigError::Missing(t.clone()));
            }
        }
        Ok(())
    }

    /// Identifies the training setup a checkpoint belongs to.
    pub fn config_hash(&self) -> String {
        let scenario_name = Path::new(&self.scenario).file_stem().and_then(|s| s.to_str()).unwrap_or(&self.scenario);
        let body = serde_json::to_string(&(&self.train, scenario_name)).expect("config serializes");
        sha256_hex(body.as_bytes())
    }

    pub fn load_scenario(&self) -> Result<Scenario, ConfigError> {
        load_scenario(&self.scenario)
    }
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// A built-in scenario by name, or a scenario TOML file.
pub fn load_scenario(spec: &str) -> Result<Scenario, ConfigError> {
    let sc = match Scenario::by_name(spec) {
        Some(s) => s,
        None => {
            let text = fs::read_to_string(spec).map_err(|e| ConfigError::Read { path: spec.into(), message: e.to_string() })?;
            toml::from_str(&text).map_err(|e| ConfigError::Scenario(e.to_string()))?
        }
    };
    sc.validate().map_err(|e| ConfigError::Scenario(e.to_string()))?;
    Ok(sc)
}

pub fn scenario_to_toml(sc: &Scenario) -> Result<String, ConfigError> {
    toml::to_string(sc).map_err(|e| ConfigError::Scenario(e.to_string()))
}
