//! Append-only run memory: one line-delimited JSON log plus a sidecar
//! directory of clips addressed by content hash.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use ogr_core::agents::{parse_response, strip_history, DialogueSink, Exchange, HistorySource, ParseContext, PromptBundle, Role};
use ogr_core::curriculum::TaskSet;
use ogr_core::train::RolloutClip;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::records::{check_payload, to_payload, ClipRef, DialoguePayload, Kind};

pub const LOG_FILE: &str = "memory.jsonl";
pub const CLIPS_DIR: &str = "clips";
pub const LOG_FORMAT: &str = "ogr-memory";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("{kind:?} payload rejected: {message}")]
    NonCanonical { kind: Kind, message: String },
    #[error("record {id}: {message}")]
    Mismatch { id: u64, message: String },
}

impl From<std::io::Error> for MemoryError {
    fn from(e: std::io::Error) -> Self {
        MemoryError::StorageFailure(e.to_string())
    }
}

/// First line of every log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub task_set: TaskSet,
    pub n_branches: usize,
}

impl LogHeader {
    pub fn new(scenario: &str, task_set: TaskSet, n_branches: usize) -> Self {
        Self { format: LOG_FORMAT.into(), version: LOG_VERSION, scenario: scenario.into(), task_set, n_branches }
    }

    fn ctx(&self, stage: u32) -> ParseContext<'_> {
        ParseContext { stage, task_set: &self.task_set, n_branches: self.n_branches }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub id: u64,
    pub stage: u32,
    pub branch: Option<usize>,
    pub role: Option<Role>,
    pub kind: Kind,
    pub payload: String,
    /// Unix time in milliseconds.
    pub timestamp: u64,
    /// Dialogue record this artifact was parsed from.
    pub derived_from: Option<u64>,
    /// Observation registry version in force when the record was written.
    pub registry_version: u32,
}

/// A record before the log assigns its id and timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewRecord {
    pub stage: u32,
    pub branch: Option<usize>,
    pub role: Option<Role>,
    pub kind: Kind,
    pub payload: String,
    pub derived_from: Option<u64>,
}

impl NewRecord {
    pub fn new(stage: u32, kind: Kind, payload: impl Into<String>) -> Self {
        Self { stage, branch: None, role: None, kind, payload: payload.into(), derived_from: None }
    }

    pub fn branch(mut self, b: Option<usize>) -> Self {
        self.branch = b;
        self
    }

    pub fn role(mut self, r: Role) -> Self {
        self.role = Some(r);
        self
    }

    pub fn derived_from(mut self, id: Option<u64>) -> Self {
        self.derived_from = id;
        self
    }
}

struct Inner {
    file: File,
    records: Vec<MemoryRecord>,
}

pub struct Memory {
    dir: PathBuf,
    header: LogHeader,
    inner: Mutex<Inner>,
    registry_version: AtomicU32,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a log, checking the header, byte-canonical lines and contiguous ids.
fn read_log(path: &Path) -> Result<(LogHeader, Vec<MemoryRecord>), MemoryError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let corrupt = |line, message: String| MemoryError::Corrupt { line, message };
    let first = lines.next().ok_or_else(|| corrupt(1, "empty log".into()))??;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| corrupt(1, e.to_string()))?;
    if header.format != LOG_FORMAT || header.version != LOG_VERSION {
        return Err(corrupt(1, format!("unsupported log format {} v{}", header.format, header.version)));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line?;
        let rec: MemoryRecord = serde_json::from_str(&line).map_err(|e| corrupt(n, e.to_string()))?;
        if serde_json::to_string(&rec).map_err(|e| corrupt(n, e.to_string()))? != line {
            return Err(corrupt(n, "record is not byte-canonical".into()));
        }
        if rec.id != records.len() as u64 + 1 {
            return Err(corrupt(n, format!("id {} breaks the contiguous sequence", rec.id)));
        }
        records.push(rec);
    }
    Ok((header, records))
}

impl Memory {
    /// Opens the log in `dir`, creating it with `header` when absent. An
    /// existing log must carry the same header.
    pub fn open_or_create(dir: &Path, header: LogHeader) -> Result<Self, MemoryError> {
        fs::create_dir_all(dir.join(CLIPS_DIR))?;
        let path = dir.join(LOG_FILE);
        let records = if path.exists() {
            let (existing, records) = read_log(&path)?;
            if existing != header {
                return Err(MemoryError::Corrupt { line: 1, message: "log header does not match this run".into() });
            }
            records
        } else {
            let mut f = File::create(&path)?;
            writeln!(f, "{}", to_payload(&header))?;
            f.sync_all()?;
            Vec::new()
        };
        let file = OpenOptions::new().append(true).open(&path)?;
        let version = records.last().map_or(1, |r| r.registry_version);
        Ok(Self { dir: dir.to_path_buf(), header, inner: Mutex::new(Inner { file, records }), registry_version: AtomicU32::new(version) })
    }

    /// Opens an existing log read-write.
    pub fn open(dir: &Path) -> Result<Self, MemoryError> {
        let (header, _) = read_log(&dir.join(LOG_FILE))?;
        Self::open_or_create(dir, header)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    /// Version stamped on subsequent records.
    pub fn set_registry_version(&self, v: u32) {
        self.registry_version.store(v, Ordering::SeqCst);
    }

    pub fn registry_version(&self) -> u32 {
        self.registry_version.load(Ordering::SeqCst)
    }

    /// Validates, writes and syncs one record; returns its id.
    pub fn append(&self, rec: NewRecord) -> Result<u64, MemoryError> {
        check_payload(rec.kind, rec.role, &rec.payload, &self.header.ctx(rec.stage))
            .map_err(|message| MemoryError::NonCanonical { kind: rec.kind, message })?;
        let mut inner = self.inner.lock().map_err(|_| MemoryError::StorageFailure("writer poisoned".into()))?;
        let record = MemoryRecord {
            id: inner.records.len() as u64 + 1,
            stage: rec.stage,
            branch: rec.branch,
            role: rec.role,
            kind: rec.kind,
            payload: rec.payload,
            timestamp: now_ms(),
            derived_from: rec.derived_from,
            registry_version: self.registry_version(),
        };
        let mut line = to_payload(&record);
        line.push('\n');
        inner.file.write_all(line.as_bytes())?;
        inner.file.sync_data()?;
        let id = record.id;
        inner.records.push(record);
        Ok(id)
    }

    /// Snapshot of every record appended so far.
    pub fn records(&self) -> Vec<MemoryRecord> {
        self.inner.lock().map(|i| i.records.clone()).unwrap_or_default()
    }

    pub fn get(&self, id: u64) -> Option<MemoryRecord> {
        let inner = self.inner.lock().ok()?;
        id.checked_sub(1).and_then(|i| inner.records.get(i as usize)).cloned()
    }

    /// Dialogue records of `role` from stage `stage - 1`, in append order.
    pub fn dialogue_history(&self, role: Role, stage: u32) -> Vec<MemoryRecord> {
        if stage < 2 {
            return Vec::new();
        }
        let inner = match self.inner.lock() {
            Ok(i) => i,
            Err(_) => return Vec::new(),
        };
        inner.records.iter().filter(|r| r.kind == Kind::Dialogue && r.role == Some(role) && r.stage == stage - 1).cloned().collect()
    }

    /// Appends a Dialogue record for one exchange.
    pub fn record_dialogue(&self, bundle: &PromptBundle, response: &str) -> Result<u64, MemoryError> {
        let body = DialoguePayload { prompt: bundle.clone(), response: response.to_string() };
        self.append(NewRecord::new(bundle.stage, Kind::Dialogue, to_payload(&body)).branch(bundle.branch).role(bundle.role))
    }

    /// Writes `clip` to the sidecar directory; returns its content hash.
    pub fn store_clip(&self, clip: &RolloutClip) -> Result<String, MemoryError> {
        let body = to_payload(clip);
        let hash = sha256_hex(body.as_bytes());
        let path = self.dir.join(CLIPS_DIR).join(format!("{hash}.json"));
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            let mut f = File::create(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &path)?;
        }
        Ok(hash)
    }

    pub fn load_clip(&self, hash: &str) -> Result<RolloutClip, MemoryError> {
        load_clip(&self.dir, hash)
    }
}

fn load_clip(dir: &Path, hash: &str) -> Result<RolloutClip, MemoryError> {
    let body = fs::read(dir.join(CLIPS_DIR).join(format!("{hash}.json")))?;
    if sha256_hex(&body) != hash {
        return Err(MemoryError::StorageFailure(format!("clip {hash} does not match its hash")));
    }
    serde_json::from_slice(&body).map_err(|e| MemoryError::StorageFailure(e.to_string()))
}

impl HistorySource for Memory {
    fn history(&self, role: Role, stage: u32) -> Vec<Exchange> {
        self.dialogue_history(role, stage)
            .into_iter()
            .filter_map(|r| serde_json::from_str::<DialoguePayload>(&r.payload).ok())
            .map(|d| Exchange { branch: d.prompt.branch, prompt: strip_history(&d.prompt.render()), response: d.response })
            .collect()
    }
}

impl DialogueSink for Memory {
    fn record(&self, bundle: &PromptBundle, response: &str) {
        // Failures surface on the next explicit append.
        let _ = self.record_dialogue(bundle, response);
    }
}

/// Outcome of a successful replay.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub records: usize,
    pub dialogues: usize,
    /// Artifacts re-derived from their source dialogue.
    pub rederived: usize,
    pub clips: usize,
}

impl std::fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "verified {} records ({} dialogues, {} re-derived artifacts, {} clips)",
            self.records, self.dialogues, self.rederived, self.clips
        )
    }
}

/// Re-reads the log in `dir`, re-runs every parser and checks that each
/// derived artifact and every clip matches byte for byte.
pub fn replay(dir: &Path) -> Result<ReplayReport, MemoryError> {
    let (header, records) = read_log(&dir.join(LOG_FILE))?;
    let mut report = ReplayReport { records: records.len(), ..Default::default() };
    let mismatch = |id, message: String| MemoryError::Mismatch { id, message };
    for rec in &records {
        check_payload(rec.kind, rec.role, &rec.payload, &header.ctx(rec.stage)).map_err(|m| mismatch(rec.id, m))?;
        match rec.kind {
            Kind::Dialogue => report.dialogues += 1,
            Kind::Clip => {
                let r: ClipRef = serde_json::from_str(&rec.payload).map_err(|e| mismatch(rec.id, e.to_string()))?;
                let clip = load_clip(dir, &r.hash).map_err(|e| mismatch(rec.id, e.to_string()))?;
                if clip.outcome != r.outcome || clip.frames.len() != r.frames || clip.episode != r.episode {
                    return Err(mismatch(rec.id, "clip sidecar disagrees with its record".into()));
                }
                report.clips += 1;
            }
            _ => {}
        }
        let Some(src) = rec.derived_from else { continue };
        let role = rec.kind.parser_role(rec.role).ok_or_else(|| mismatch(rec.id, "kind has no parser".into()))?;
        let d = src
            .checked_sub(1)
            .and_then(|k| records.get(k as usize))
            .filter(|d| d.id < rec.id && d.kind == Kind::Dialogue && d.role == Some(role))
            .ok_or_else(|| mismatch(rec.id, format!("source dialogue {src} missing or of the wrong role")))?;
        let dialogue: DialoguePayload = serde_json::from_str(&d.payload).map_err(|e| mismatch(d.id, e.to_string()))?;
        let parsed = parse_response(role, &dialogue.response, &header.ctx(rec.stage)).map_err(|e| mismatch(rec.id, e.to_string()))?;
        if parsed.render() != rec.payload {
            return Err(mismatch(rec.id, "re-derived artifact differs from the logged one".into()));
        }
        report.rederived += 1;
    }
    Ok(report)
}
