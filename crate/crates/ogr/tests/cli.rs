mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::tiny_config;

fn ogr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ogr")).current_dir(dir).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn train_evaluate_replay_review() {
    let d = tempfile::tempdir().unwrap();
    let cfg = tiny_config(d.path(), 2, 2);
    let cfg_path = d.path().join("run.toml");
    std::fs::write(&cfg_path, toml::to_string(&cfg).unwrap()).unwrap();
    let c = cfg_path.to_str().unwrap();

    let o = ogr(d.path(), &["train", "--config", c]);
    assert!(o.status.success(), "{}", text(&o));
    let out = text(&o);
    assert!(out.contains("stage 1") && out.contains("stage 2"), "{out}");
    assert!(d.path().join("run/checkpoints/stage2_winner.ckpt").is_file());

    // a finished run resumes to nothing
    let o = ogr(d.path(), &["train", "--config", c]);
    assert!(o.status.success());
    assert!(text(&o).contains("already complete"));

    let o = ogr(d.path(), &["replay", "--config", c]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).starts_with("verified "));

    let o = ogr(d.path(), &["evaluate", "--config", c, "--checkpoint", "run/checkpoints/stage2_winner.ckpt", "--episodes", "2"]);
    assert!(o.status.success(), "{}", text(&o));
    let table = String::from_utf8_lossy(&o.stdout).to_string();
    for band in ["empty", "low", "medium", "high"] {
        assert!(table.lines().any(|l| l.starts_with(band)), "{table}");
    }

    // the stub reward for branch 1 proposes ttc_front
    let o = ogr(d.path(), &["review", "--config", c, "list"]);
    assert!(text(&o).contains("ttc_front"), "{}", text(&o));
    let o = ogr(d.path(), &["review", "--config", c, "approve", "ttc_front"]);
    assert!(o.status.success(), "{}", text(&o));
    let o = ogr(d.path(), &["review", "--config", c, "approve", "ttc_front"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let d = tempfile::tempdir().unwrap();
    let stub = format!("stub:{}", common::stub_dir().display());
    let o = ogr(d.path(), &["review", "--backend", &stub, "--out", "empty", "approve", "ttc_front"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("no pending proposal"), "{}", text(&o));

    let o = ogr(d.path(), &["replay", "--backend", &stub, "--out", "empty"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).starts_with("error: "));

    let o = ogr(d.path(), &["train", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("missing.toml"));

    let o = ogr(d.path(), &["train", "--backend", "stub:no/such/dir"]);
    assert_eq!(o.status.code(), Some(1));

    let o = ogr(d.path(), &["evaluate", "--backend", &stub, "--checkpoint", "nope.ckpt"]);
    assert_eq!(o.status.code(), Some(1));

    let o = ogr(d.path(), &["fly"]);
    assert!(!o.status.success());
}
