mod common;

use std::collections::BTreeSet;

use common::{tiny_config, Scripted};
use ogr::memory::{replay, MemoryRecord};
use ogr::records::{Kind, StageSummary};
use ogr::review::QueueStore;
use ogr::stages::{fallback_score, fallback_winner, Runner, REQUERY_BUDGET};
use ogr_core::agents::{BackendError, Payload, Role, HISTORY_BEGIN};
use ogr_core::rewardlang::{check, expert_program, parse_program, ObservationRegistry, RewardProgram};
use ogr_core::train::RolloutClip;

fn of_kind(recs: &[MemoryRecord], kind: Kind, stage: u32) -> Vec<MemoryRecord> {
    recs.iter().filter(|r| r.kind == kind && r.stage == stage).cloned().collect()
}

#[test]
fn single_branch_selects_branch_zero() {
    let d = tempfile::tempdir().unwrap();
    let backend = Scripted::plain();
    let runner = Runner::new(tiny_config(d.path(), 1, 1), &backend).unwrap();
    let out = runner.run(|_| {}).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].winner, 0);
    assert!(d.path().join("run/checkpoints/stage1_winner.ckpt").is_file());
}

#[test]
fn scripted_scores_break_equal_reports() {
    let d = tempfile::tempdir().unwrap();
    let backend = Scripted::new(|b| match (b.role, b.branch) {
        (Role::Scorer, Some(i)) => Some(Ok(format!("SCORE: {}", [2, 5, 9][i]))),
        _ => None,
    });
    let runner = Runner::new(tiny_config(d.path(), 3, 1), &backend).unwrap();
    let s = runner.run(|_| {}).unwrap().remove(0);
    let srs: BTreeSet<u64> = s.branches.iter().map(|b| b.sr.to_bits()).collect();
    assert_eq!(srs.len(), 1, "precondition: equal test reports {:?}", s.branches);
    assert!(s.reflector_fallback);
    assert_eq!(s.branches.iter().map(|b| b.mean_score).collect::<Vec<_>>(), vec![2.0, 5.0, 9.0]);
    assert_eq!(s.winner, 2);
    let sel = of_kind(&runner.memory.records(), Kind::Selection, 1);
    assert_eq!(sel.len(), 1);
    assert_eq!(sel[0].derived_from, None);
}

#[test]
fn permanent_parse_failure_still_finishes() {
    let d = tempfile::tempdir().unwrap();
    let backend = Scripted::new(|_| Some(Ok("I would rather not say.".into())));
    let runner = Runner::new(tiny_config(d.path(), 2, 1), &backend).unwrap();
    let s = runner.run(|_| {}).unwrap().remove(0);
    assert!(s.aborted_generation);
    assert!(s.reflector_fallback);
    assert!(s.branches.iter().all(|b| b.generation_fallback));
    assert_eq!(backend.count(Role::Orchestrator, 1), REQUERY_BUDGET);
    assert_eq!(backend.count(Role::Reflector, 1), REQUERY_BUDGET);

    let recs = runner.memory.records();
    // fallback pair is the previous stage's: the expert reward
    for r in of_kind(&recs, Kind::RewardProgram, 1) {
        assert_eq!(r.payload, Payload::Reward(expert_program()).render());
        assert_eq!(r.derived_from, None);
    }
    // fallback scores follow the clip outcomes
    let clips: Vec<RolloutClip> = of_kind(&recs, Kind::Clip, 1)
        .iter()
        .map(|r| runner.memory.load_clip(serde_json::from_str::<serde_json::Value>(&r.payload).unwrap()["hash"].as_str().unwrap()).unwrap())
        .collect();
    let mut scores: Vec<String> = of_kind(&recs, Kind::Score, 1).iter().map(|r| r.payload.clone()).collect();
    let mut want: Vec<String> = clips.iter().map(|c| Payload::Score(fallback_score(c.outcome)).render()).collect();
    scores.sort();
    want.sort();
    assert_eq!(scores, want);
    replay(runner.out()).unwrap();
}

#[test]
fn transport_failure_still_finishes() {
    let d = tempfile::tempdir().unwrap();
    let backend = Scripted::new(|b| (b.role != Role::Orchestrator).then(|| Err(BackendError::Timeout)));
    let runner = Runner::new(tiny_config(d.path(), 2, 1), &backend).unwrap();
    let s = runner.run(|_| {}).unwrap().remove(0);
    assert!(s.aborted_generation && s.reflector_fallback);
    let sr: Vec<(f64, f64)> = s.branches.iter().map(|b| (b.sr, b.mean_score)).collect();
    assert_eq!(s.winner, fallback_winner(&sr));
}

#[test]
fn stages_chain_and_resume() {
    let d = tempfile::tempdir().unwrap();
    let backend = Scripted::plain();
    let cfg = tiny_config(d.path(), 2, 2);
    let mut seen: Vec<StageSummary> = Vec::new();
    {
        let runner = Runner::new(cfg.clone(), &backend).unwrap();
        // run only the first stage, as an interrupted run would
        let st = runner.load_state().unwrap();
        let (next, s1) = runner.run_stage(st).unwrap();
        assert_eq!(next.stage, 2);
        assert_eq!(next.winners, vec!["checkpoints/stage1_winner.ckpt".to_string()]);
        seen.push(s1);
        std::fs::write(runner.out().join(ogr::stages::STATE_FILE), serde_json::to_string(&next).unwrap()).unwrap();
    }
    let runner = Runner::new(cfg, &backend).unwrap();
    seen.extend(runner.run(|_| {}).unwrap());
    assert_eq!(seen.iter().map(|s| s.stage).collect::<Vec<_>>(), vec![1, 2]);
    assert!(runner.run(|_| {}).unwrap().is_empty());
    assert_eq!(runner.load_state().unwrap().stage, 3);

    let recs = runner.memory.records();
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r.id, i as u64 + 1);
    }
    for n in 1..=2 {
        let winners: Vec<_> =
            of_kind(&recs, Kind::CheckpointRef, n).into_iter().filter(|r| r.payload.contains("\"winner\":true")).collect();
        assert_eq!(winners.len(), 1);
        for k in [
            Kind::Dialogue,
            Kind::StagePlan,
            Kind::RewardProgram,
            Kind::CurriculumSpec,
            Kind::TestReport,
            Kind::Clip,
            Kind::Score,
            Kind::Selection,
            Kind::StageSummary,
        ] {
            assert!(!of_kind(&recs, k, n).is_empty(), "stage {n} has no {k:?} record");
        }
    }
    // stage 2 trains from the stage 1 winner and sees its history
    let orch2 = recs.iter().find(|r| r.kind == Kind::Dialogue && r.stage == 2 && r.role == Some(Role::Orchestrator)).unwrap();
    assert!(orch2.payload.contains(HISTORY_BEGIN));
    let report = replay(runner.out()).unwrap();
    assert_eq!(report.records, recs.len());
    assert!(report.rederived > 0 && report.clips > 0);
}

#[test]
fn approval_takes_effect_at_next_boundary() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("run");
    let queue_dir = out.clone();
    // the operator approves while stage 1 is still reflecting
    let backend = Scripted::new(move |b| {
        if b.role == Role::Reflector && b.stage == 1 {
            let q = QueueStore::new(&queue_dir);
            if q.load().unwrap().pending().iter().any(|p| p.variable == "ttc_front") {
                q.update(|q| q.approve("ttc_front")).unwrap();
            }
        }
        None
    });
    let runner = Runner::new(tiny_config(d.path(), 3, 2), &backend).unwrap();
    runner.run(|_| {}).unwrap();
    let recs = runner.memory.records();

    for r in &recs {
        assert_eq!(r.registry_version, r.stage, "record {} ({:?}) stamped with the wrong registry", r.id, r.kind);
    }
    let proposals1 = of_kind(&recs, Kind::Proposal, 1);
    assert!(proposals1.iter().any(|r| r.payload.contains("ttc_front") && r.branch == Some(1)));
    assert!(!of_kind(&recs, Kind::Proposal, 2).iter().any(|r| r.payload.contains("ttc_front")));
    let reg: ObservationRegistry = serde_json::from_str(&of_kind(&recs, Kind::Registry, 2)[0].payload).unwrap();
    assert_eq!(reg.version, 2);
    assert!(reg.contains("ttc_front"));
    assert!(of_kind(&recs, Kind::Registry, 1).is_empty());

    let prog = |stage| -> RewardProgram {
        let r = of_kind(&recs, Kind::RewardProgram, stage).into_iter().find(|r| r.branch == Some(1)).unwrap();
        let body: String = r.payload.lines().filter(|l| !l.starts_with("```")).map(|l| format!("{l}\n")).collect();
        parse_program(&body).unwrap()
    };
    let ttc = |p: &RewardProgram| p.terms.iter().position(|t| t.expr.to_string().contains("ttc_front")).unwrap();
    let (p1, p2) = (prog(1), prog(2));
    assert!(check(&p1, &ObservationRegistry::initial(), 1).suspended[ttc(&p1)]);
    assert!(!check(&p2, &reg, 2).suspended[ttc(&p2)]);

    let q = QueueStore::new(&out).load().unwrap();
    let e = q.entries.iter().find(|e| e.proposal.variable == "ttc_front").unwrap();
    assert_eq!(e.applied_at_stage, Some(2));
}
