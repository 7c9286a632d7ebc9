mod common;

use std::fs;
use std::path::Path;

use common::stub_dir;
use ogr::backends::StubDir;
use ogr::config::{load_scenario, scenario_to_toml, BackendChoice, ConfigError, Profile, RunConfig};
use ogr_core::agents::{parse_response, ParseContext, Role};
use ogr_core::sim::Scenario;

const SAMPLE: &str = r#"
profile = "desk"
seed = 42
stages = 3
backend = "stub:responses"
out = "runs/a"

[train]
hidden = [32, 32]

[train.ppo]
epochs = 4
"#;

#[test]
fn parsing_twice_gives_equal_configs() {
    let d = tempfile::tempdir().unwrap();
    let a = RunConfig::from_toml(SAMPLE, d.path(), None).unwrap();
    let b = RunConfig::from_toml(SAMPLE, d.path(), None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.profile, Profile::Desk);
    assert_eq!((a.seed, a.stages, a.n_g, a.episodes_per_stage), (42, 3, 3, 150));
    assert_eq!(a.train.hidden, vec![32, 32]);
    assert_eq!(a.train.ppo.epochs, 4);
    assert_eq!(a.train.ppo.minibatch, 64);
    assert_eq!(a.out, d.path().join("runs/a"));
    assert_eq!(a.backend_choice().unwrap(), BackendChoice::Stub(d.path().join("responses")));
    // written back out, the file describes the same run
    let again = RunConfig::from_toml(&toml::to_string(&a).unwrap(), Path::new("/elsewhere"), None).unwrap();
    assert_eq!(again, a);
}

#[test]
fn profiles_and_overrides() {
    let full = RunConfig::profile(Profile::Full);
    assert_eq!((full.stages, full.episodes_per_stage, full.curriculum_refreshes, full.n_g, full.n_s, full.n_test), (5, 1000, 10, 5, 4, 20));
    let desk = RunConfig::from_toml("", Path::new("."), Some(Profile::Desk)).unwrap();
    assert_eq!((desk.stages, desk.episodes_per_stage, desk.n_g), (5, 150, 3));
    let forced = RunConfig::from_toml(SAMPLE, Path::new("."), Some(Profile::Full)).unwrap();
    assert_eq!((forced.profile, forced.n_g, forced.seed), (Profile::Full, 5, 42));
}

#[test]
fn bounds_and_paths_are_checked() {
    let d = tempfile::tempdir().unwrap();
    let parse = |extra: &str| RunConfig::from_toml(&format!("backend = \"stub:{}\"\n{extra}", stub_dir().display()), d.path(), None);
    assert!(parse("").unwrap().validate().is_ok());
    for (extra, field) in [
        ("n_g = 0", "n_g"),
        ("n_g = 17", "n_g"),
        ("stages = 0", "stages"),
        ("episodes_per_stage = 5\ncurriculum_refreshes = 6", "curriculum_refreshes"),
        ("[train]\nhidden = []", "train.hidden"),
        ("[train]\naction_repeat = 0", "train.action_repeat"),
        ("goal = \"  \"", "goal"),
    ] {
        match parse(extra).unwrap().validate() {
            Err(ConfigError::Bounds { field: f, .. }) => assert_eq!(f, field, "{extra}"),
            other => panic!("{extra}: {other:?}"),
        }
    }
    assert!(matches!(parse("[train.ppo]\nclip_eps = -1.0").unwrap().validate(), Err(ConfigError::Bounds { field: "train.ppo", .. })));
    assert!(matches!(parse("scenario = \"nowhere.toml\"").unwrap().validate(), Err(ConfigError::Missing(_))));
    assert!(matches!(parse("templates = \"no_templates\"").unwrap().validate(), Err(ConfigError::Missing(_))));
    assert!(matches!(RunConfig::from_toml("backend = \"stub:nope\"", d.path(), None).unwrap().validate(), Err(ConfigError::Missing(_))));
    assert!(matches!(parse("colour = \"blue\""), Err(ConfigError::Parse(_))));
    assert!(matches!(parse("n_g = \"three\""), Err(ConfigError::Parse(_))));
    assert!(matches!(BackendChoice::parse("carrier-pigeon"), Err(ConfigError::Backend(_))));
    assert!(RunConfig::load(&d.path().join("absent.toml"), None).is_err());
}

#[test]
fn config_hash_tracks_training_setup_only() {
    let a = RunConfig::profile(Profile::Desk);
    let mut b = a.clone();
    b.seed = 99;
    b.out = "elsewhere".into();
    assert_eq!(a.config_hash(), b.config_hash());
    b.train.hidden = vec![8];
    assert_ne!(a.config_hash(), b.config_hash());
    let mut c = a.clone();
    c.scenario = "merging".into();
    assert_ne!(a.config_hash(), c.config_hash());
}

#[test]
fn scenario_files_round_trip() {
    let d = tempfile::tempdir().unwrap();
    for name in ["overtaking", "merging", "intersection"] {
        let sc = Scenario::by_name(name).unwrap();
        let path = d.path().join(format!("{name}.toml"));
        fs::write(&path, scenario_to_toml(&sc).unwrap()).unwrap();
        let back = load_scenario(path.to_str().unwrap()).unwrap();
        assert_eq!(back, sc);
        assert_eq!(scenario_to_toml(&back).unwrap(), fs::read_to_string(&path).unwrap());
        assert_eq!(load_scenario(name).unwrap(), sc);
    }
    let bad = d.path().join("bad.toml");
    let mut sc = Scenario::by_name("overtaking").unwrap();
    sc.density_counts.pop();
    fs::write(&bad, scenario_to_toml(&sc).unwrap()).unwrap();
    assert!(matches!(load_scenario(bad.to_str().unwrap()), Err(ConfigError::Scenario(_))));
}

/// Every scripted response parses, and its canonical rendering parses back
/// to the same payload.
#[test]
fn stub_corpus_parses_and_prints_back() {
    let sc = Scenario::by_name("overtaking").unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(stub_dir()).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let role = Role::ALL.into_iter().find(|r| stem == r.name() || stem.starts_with(&format!("{}_", r.name()))).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let ctx = ParseContext { stage: 2, task_set: &sc.task_set, n_branches: 3 };
        if stem == "reflector" {
            // scripted to be undecidable so the fallback selection runs
            assert!(parse_response(role, &text, &ctx).is_err());
        } else {
            let parsed = parse_response(role, &text, &ctx).unwrap_or_else(|e| panic!("{stem}: {e}"));
            let again = parse_response(role, &parsed.render(), &ctx).unwrap();
            assert_eq!(again, parsed, "{stem}");
            assert_eq!(again.render(), parsed.render());
        }
        seen += 1;
    }
    assert!(seen >= Role::ALL.len());
    assert!(StubDir::new(stub_dir()).is_ok());
}
