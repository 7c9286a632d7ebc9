mod common;

use std::fs;

use common::{tiny_config, Scripted};
use ogr::memory::{replay, LogHeader, Memory, MemoryError, NewRecord, LOG_FILE};
use ogr::records::{to_payload, Kind};
use ogr::stages::Runner;
use ogr_core::agents::{HistorySource, Payload, PromptBundle, Role, HISTORY_BEGIN};
use ogr_core::rewardlang::{expert_program, AugmentationProposal, ProposalStatus};
use ogr_core::rng::rng;
use ogr_core::sim::scenarios::overtaking;
use rand::Rng;

fn header() -> LogHeader {
    LogHeader::new("overtaking", overtaking().task_set, 3)
}

fn bundle(role: Role, stage: u32, branch: Option<usize>, user: &str) -> PromptBundle {
    PromptBundle { role, stage, branch, system: "sys".into(), user: user.into(), attachments: vec![] }
}

fn proposal(v: &str) -> String {
    to_payload(&AugmentationProposal {
        variable: v.into(),
        term: "t".into(),
        stage: 1,
        justification: "because".into(),
        status: ProposalStatus::Pending,
    })
}

#[test]
fn ids_are_contiguous_and_lines_read_back_exactly() {
    let d = tempfile::tempdir().unwrap();
    let m = Memory::open_or_create(d.path(), header()).unwrap();
    let mut ids = Vec::new();
    for i in 0..20u32 {
        ids.push(m.append(NewRecord::new(1 + i / 7, Kind::Proposal, proposal(&format!("v{i}")))).unwrap());
    }
    assert_eq!(ids, (1..=20).collect::<Vec<u64>>());
    let text = fs::read_to_string(d.path().join(LOG_FILE)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 21);
    assert_eq!(lines[0], to_payload(&header()));
    for (rec, line) in m.records().iter().zip(&lines[1..]) {
        assert_eq!(to_payload(rec), *line);
        assert_eq!(m.get(rec.id).as_ref(), Some(rec));
    }
    drop(m);
    let again = Memory::open(d.path()).unwrap();
    assert_eq!(again.records().len(), 20);
    assert_eq!(again.append(NewRecord::new(3, Kind::Proposal, proposal("late"))).unwrap(), 21);
}

#[test]
fn payloads_must_be_canonical() {
    let d = tempfile::tempdir().unwrap();
    let m = Memory::open_or_create(d.path(), header()).unwrap();
    let bad = NewRecord::new(1, Kind::RewardProgram, "term a weight 1 = delta_s").role(Role::RewardGenerator);
    assert!(matches!(m.append(bad), Err(MemoryError::NonCanonical { .. })));
    let spaced = NewRecord::new(1, Kind::Proposal, format!(" {}", proposal("x")));
    assert!(matches!(m.append(spaced), Err(MemoryError::NonCanonical { .. })));
    let good = NewRecord::new(1, Kind::RewardProgram, Payload::Reward(expert_program()).render()).role(Role::RewardGenerator);
    assert_eq!(m.append(good).unwrap(), 1);
    assert!(m.records().len() == 1);
}

#[test]
fn header_and_corruption_are_detected() {
    let d = tempfile::tempdir().unwrap();
    let m = Memory::open_or_create(d.path(), header()).unwrap();
    m.append(NewRecord::new(1, Kind::Proposal, proposal("a"))).unwrap();
    m.append(NewRecord::new(1, Kind::Proposal, proposal("b"))).unwrap();
    drop(m);
    let other = LogHeader::new("merging", overtaking().task_set, 3);
    assert!(matches!(Memory::open_or_create(d.path(), other), Err(MemoryError::Corrupt { line: 1, .. })));

    let path = d.path().join(LOG_FILE);
    let text = fs::read_to_string(&path).unwrap();
    // a dropped record breaks the id sequence
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&path, format!("{}\n{}\n", lines[0], lines[2])).unwrap();
    assert!(matches!(Memory::open(d.path()), Err(MemoryError::Corrupt { line: 2, .. })));
    // reformatted json is not byte-canonical
    fs::write(&path, format!("{}\n{}\n", lines[0], lines[1].replace(",", ", "))).unwrap();
    assert!(matches!(Memory::open(d.path()), Err(MemoryError::Corrupt { line: 2, .. })));
}

/// History is every dialogue of the role from the previous stage, checked
/// against a brute-force filter over a random log.
#[test]
fn history_matches_brute_force() {
    let d = tempfile::tempdir().unwrap();
    let m = Memory::open_or_create(d.path(), header()).unwrap();
    let mut r = rng(17);
    let mut log: Vec<(Role, u32, String)> = Vec::new();
    for k in 0..200 {
        let role = Role::ALL[r.gen_range(0..Role::ALL.len())];
        let stage = r.gen_range(1..5);
        let branch = r.gen_bool(0.5).then(|| r.gen_range(0..3));
        let b = bundle(role, stage, branch, &format!("ask {k}"));
        m.record_dialogue(&b, &format!("reply {k}")).unwrap();
        log.push((role, stage, format!("reply {k}")));
    }
    for role in Role::ALL {
        for stage in 0..6 {
            let want: Vec<&String> = log.iter().filter(|(r, s, _)| *r == role && *s + 1 == stage).map(|e| &e.2).collect();
            let got = m.history(role, stage);
            assert_eq!(got.iter().map(|e| &e.response).collect::<Vec<_>>(), want);
            assert!(got.iter().all(|e| !e.prompt.contains(HISTORY_BEGIN)));
        }
    }
}

#[test]
fn replay_verifies_a_run_and_catches_tampering() {
    let d = tempfile::tempdir().unwrap();
    let backend = Scripted::plain();
    let runner = Runner::new(tiny_config(d.path(), 2, 1), &backend).unwrap();
    runner.run(|_| {}).unwrap();
    let out = runner.out().to_path_buf();
    drop(runner);
    let report = replay(&out).unwrap();
    assert!(report.to_string().starts_with("verified "));
    assert!(report.dialogues > 0 && report.rederived > 0 && report.clips > 0);

    let path = out.join(LOG_FILE);
    let original = fs::read_to_string(&path).unwrap();
    // change the reward generator's reply but not the artifact parsed from it
    let tampered: String = original
        .lines()
        .map(|l| {
            if l.contains("\"kind\":\"Dialogue\"") && l.contains("reward_generator") {
                l.replace("weight 0.1 = delta_s", "weight 0.3 = delta_s")
            } else {
                l.to_string()
            }
        })
        .map(|l| l + "\n")
        .collect();
    assert_ne!(tampered, original);
    fs::write(&path, &tampered).unwrap();
    assert!(matches!(replay(&out), Err(MemoryError::Mismatch { .. })));

    fs::write(&path, &original).unwrap();
    let clip = fs::read_dir(out.join("clips")).unwrap().next().unwrap().unwrap().path();
    let body = fs::read_to_string(&clip).unwrap();
    fs::write(&clip, body.replacen('1', "2", 1)).unwrap();
    assert!(matches!(replay(&out), Err(MemoryError::Mismatch { .. })));
}
