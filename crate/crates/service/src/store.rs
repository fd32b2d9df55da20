//! Sessions, their files, and recovery after a restart.
//!
//! Each session owns two files in the data directory:
//!
//! * `<id>.session.json`: schema, configuration, idempotency key and the
//!   finished flag. Rewritten atomically (temp file, fsync, rename).
//! * `<id>.trace.jsonl`: one trace record per answer, appended and fsynced
//!   before the answer is acknowledged.
//!
//! Replaying the answers through a fresh [`Optimizer`] rebuilds the exact
//! state, pending pair included, because everything but wall-clock fields
//! is a pure function of the configuration and the answers.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use preftree::explain::{explain_model, Explanation};
use preftree::optimize::{now_seconds, Phase, RunError};
use preftree::{CandidatePair, Choice, FeatureSchema, Instance, Optimizer, RunConfig, TraceRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("session is busy with another request")]
    Busy,
    #[error("{0}")]
    Conflict(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("corrupt session file {file}: {message}")]
    Corrupt { file: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub id: String,
    pub created_at: f64,
    pub idempotency_key: Option<String>,
    pub schema: FeatureSchema,
    pub config: RunConfig,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingAnswer,
    /// Budget used up; waiting for the client to finish.
    Idle,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPair {
    pub step: usize,
    pub a: Instance,
    pub b: Instance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub phase: Phase,
    pub answered: usize,
    pub budget: usize,
    pub model_version: u64,
    pub pending: Option<PendingPair>,
    pub schema: FeatureSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub instance: Instance,
    pub leaf: usize,
    pub mean: f64,
    pub std: f64,
}

/// Latest fitted model; `empty` until the first fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelView {
    pub empty: bool,
    pub model_version: u64,
    pub explanation: Option<Explanation>,
    pub recommendation: Option<Recommendation>,
}

/// Committed state served to readers without touching the writer lock.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub view: SessionView,
    pub model: ModelView,
    pub trace: Vec<TraceRecord>,
}

struct Writer {
    header: Header,
    optimizer: Optimizer,
    records: Vec<TraceRecord>,
    /// Seconds spent producing the pending pair.
    pending_wall_time: f64,
    trace_path: PathBuf,
}

pub struct SessionHandle {
    writer: Arc<Mutex<Writer>>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl SessionHandle {
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(snapshot);
    }
}

pub struct Store {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    /// Idempotency key to session id; also serializes session creation.
    keys: Mutex<HashMap<String, String>>,
}

fn header_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.session.json"))
}

fn trace_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.trace.jsonl"))
}

fn write_atomically(dir: &Path, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    File::open(dir)?.sync_all()
}

fn timed_propose(optimizer: &mut Optimizer) -> Result<f64, RunError> {
    let started = Instant::now();
    optimizer.propose()?;
    Ok(started.elapsed().as_secs_f64())
}

impl Writer {
    fn snapshot(&self) -> Snapshot {
        let opt = &self.optimizer;
        let pending = if self.header.finished {
            None
        } else {
            opt.pending().map(|p: &CandidatePair| PendingPair {
                step: opt.answered(),
                a: p.a.clone(),
                b: p.b.clone(),
            })
        };
        let state = if self.header.finished {
            SessionState::Finished
        } else if pending.is_some() {
            SessionState::AwaitingAnswer
        } else {
            SessionState::Idle
        };
        let model = match opt.model() {
            None => ModelView {
                empty: true,
                model_version: 0,
                explanation: None,
                recommendation: None,
            },
            Some(model) => ModelView {
                empty: false,
                model_version: opt.model_version(),
                explanation: explain_model(model, opt.schema()).ok(),
                recommendation: opt.recommend_by_model().map(|instance| {
                    let leaf = model.tree.route(&instance);
                    Recommendation {
                        leaf,
                        mean: model.posterior.mean[leaf],
                        std: model.posterior.std(leaf),
                        instance,
                    }
                }),
            },
        };
        Snapshot {
            view: SessionView {
                id: self.header.id.clone(),
                state,
                phase: opt.phase(),
                answered: opt.answered(),
                budget: opt.config().budget(),
                model_version: opt.model_version(),
                pending,
                schema: opt.schema().clone(),
            },
            model,
            trace: self.records.clone(),
        }
    }

    fn answer(&mut self, choice: Choice, expected_step: Option<usize>) -> Result<(), StoreError> {
        if self.header.finished {
            return Err(StoreError::Conflict("session is finished".into()));
        }
        let step = self.optimizer.answered();
        let queried = match self.optimizer.pending() {
            Some(p) => p.clone(),
            None => return Err(StoreError::Conflict("no pending pair: the query budget is used up".into())),
        };
        if let Some(expected) = expected_step {
            if expected != step {
                return Err(StoreError::Conflict(format!(
                    "answer is for step {expected} but the pending pair is step {step}"
                )));
            }
        }
        self.optimizer.answer(choice)?;
        let proposal = if self.optimizer.is_done() {
            Ok(0.0)
        } else {
            timed_propose(&mut self.optimizer)
        };
        let record = TraceRecord {
            step,
            queried,
            winner: choice,
            timestamp: now_seconds(),
            incumbent: self.optimizer.recommend_by_model().expect("at least one answer"),
            regret: None,
            fit_wall_time: self.pending_wall_time,
            model_version: self.optimizer.model_version(),
        };
        append_record(&self.trace_path, &record)?;
        self.records.push(record);
        self.pending_wall_time = proposal?;
        Ok(())
    }

    fn finish(&mut self, dir: &Path) -> Result<(), StoreError> {
        if self.header.finished {
            return Err(StoreError::Conflict("session is already finished".into()));
        }
        if self.optimizer.answered() > 0 {
            self.optimizer.fit().map_err(RunError::from)?;
        }
        self.header.finished = true;
        let bytes = serde_json::to_vec_pretty(&self.header).expect("header serializes");
        if let Err(e) = write_atomically(dir, &header_path(dir, &self.header.id), &bytes) {
            self.header.finished = false;
            return Err(e.into());
        }
        Ok(())
    }
}

fn append_record(path: &Path, record: &TraceRecord) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(record).expect("trace record serializes");
    line.push(b'\n');
    let mut file = OpenOptions::new().append(true).create(true).open(path)?;
    file.write_all(&line)?;
    file.sync_data()
}

/// Reads the trace, dropping a torn final line left by a crash mid-write.
fn read_records(path: &Path) -> Result<Vec<TraceRecord>, StoreError> {
    let corrupt = |message: String| StoreError::Corrupt {
        file: path.display().to_string(),
        message,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        if !line.ends_with('\n') {
            tracing::warn!(file = %path.display(), "dropping torn final trace line");
            OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
            break;
        }
        let record: TraceRecord =
            serde_json::from_str(line.trim_end()).map_err(|e| corrupt(format!("line {}: {e}", records.len() + 1)))?;
        records.push(record);
        good_len += n as u64;
    }
    Ok(records)
}

fn replay(dir: &Path, header: Header) -> Result<Writer, StoreError> {
    let path = trace_path(dir, &header.id);
    let records = read_records(&path)?;
    let mut optimizer = Optimizer::new(header.schema.clone(), header.config);
    for record in &records {
        let proposed = optimizer.propose()?.clone();
        if proposed != record.queried {
            return Err(StoreError::Corrupt {
                file: path.display().to_string(),
                message: format!("replay diverged at step {}", record.step),
            });
        }
        optimizer.answer(record.winner)?;
    }
    let mut pending_wall_time = 0.0;
    if header.finished {
        if optimizer.answered() > 0 {
            optimizer.fit().map_err(RunError::from)?;
        }
    } else if !optimizer.is_done() {
        pending_wall_time = timed_propose(&mut optimizer)?;
    }
    Ok(Writer {
        header,
        optimizer,
        records,
        pending_wall_time,
        trace_path: path,
    })
}

impl Store {
    /// Opens the data directory, creating it if needed, and resumes every
    /// session found there. Sessions that fail to load are logged and skipped.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut keys = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if !name.ends_with(".session.json") {
                continue;
            }
            let loaded = fs::read(&path)
                .map_err(StoreError::from)
                .and_then(|bytes| {
                    serde_json::from_slice::<Header>(&bytes).map_err(|e| StoreError::Corrupt {
                        file: path.display().to_string(),
                        message: e.to_string(),
                    })
                })
                .and_then(|header| replay(&dir, header));
            match loaded {
                Ok(writer) => {
                    let id = writer.header.id.clone();
                    if let Some(key) = &writer.header.idempotency_key {
                        keys.insert(key.clone(), id.clone());
                    }
                    tracing::info!(session = %id, answered = writer.optimizer.answered(), "resumed session");
                    sessions.insert(id, Arc::new(handle(writer)));
                }
                Err(e) => tracing::error!(file = %path.display(), error = %e, "skipping session"),
            }
        }
        Ok(Self {
            dir,
            sessions: RwLock::new(sessions),
            keys: Mutex::new(keys),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, StoreError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    /// Creates a session and serves its first pair. With an idempotency key
    /// already in use, returns the existing session and `false`.
    pub async fn create(
        &self,
        schema: FeatureSchema,
        config: RunConfig,
        idempotency_key: Option<String>,
    ) -> Result<(Arc<Snapshot>, bool), StoreError> {
        let mut keys = self.keys.lock().await;
        if let Some(id) = idempotency_key.as_ref().and_then(|k| keys.get(k)) {
            return Ok((self.get(id)?.snapshot(), false));
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let header = Header {
            id: id.clone(),
            created_at: now_seconds(),
            idempotency_key: idempotency_key.clone(),
            schema: schema.clone(),
            config,
            finished: false,
        };
        let mut optimizer = Optimizer::new(schema, config);
        let pending_wall_time = if optimizer.is_done() {
            0.0
        } else {
            timed_propose(&mut optimizer)?
        };
        let trace = trace_path(&self.dir, &id);
        File::create(&trace)?.sync_all()?;
        let bytes = serde_json::to_vec_pretty(&header).expect("header serializes");
        write_atomically(&self.dir, &header_path(&self.dir, &id), &bytes)?;
        let writer = Writer {
            header,
            optimizer,
            records: Vec::new(),
            pending_wall_time,
            trace_path: trace,
        };
        let handle = Arc::new(handle(writer));
        let snapshot = handle.snapshot();
        self.sessions.write().expect("session map lock").insert(id.clone(), handle);
        if let Some(key) = idempotency_key {
            keys.insert(key, id);
        }
        Ok((snapshot, true))
    }

    /// Records an answer. A second request arriving while one is being
    /// processed gets [`StoreError::Busy`].
    pub async fn answer(&self, id: &str, choice: Choice, expected_step: Option<usize>) -> Result<Arc<Snapshot>, StoreError> {
        let handle = self.get(id)?;
        let mut writer = handle.writer.clone().try_lock_owned().map_err(|_| StoreError::Busy)?;
        let h = handle.clone();
        let dir = self.dir.clone();
        tokio::task::spawn_blocking(move || {
            let result = writer.answer(choice, expected_step);
            if let Err(StoreError::Io(e)) = &result {
                // memory may be ahead of disk; rebuild from what was persisted
                tracing::error!(session = %writer.header.id, error = %e, "trace write failed, reloading session");
                match replay(&dir, writer.header.clone()) {
                    Ok(reloaded) => *writer = reloaded,
                    Err(e) => tracing::error!(error = %e, "reload failed"),
                }
            }
            // publish whatever was committed, even if the next proposal failed
            h.publish(writer.snapshot());
            result
        })
        .await
        .expect("answer task does not panic")?;
        Ok(handle.snapshot())
    }

    pub async fn finish(&self, id: &str) -> Result<Arc<Snapshot>, StoreError> {
        let handle = self.get(id)?;
        let mut writer = handle.writer.clone().try_lock_owned().map_err(|_| StoreError::Busy)?;
        let dir = self.dir.clone();
        let h = handle.clone();
        tokio::task::spawn_blocking(move || {
            let result = writer.finish(&dir);
            h.publish(writer.snapshot());
            result
        })
        .await
        .expect("finish task does not panic")?;
        Ok(handle.snapshot())
    }
}

fn handle(writer: Writer) -> SessionHandle {
    let snapshot = writer.snapshot();
    SessionHandle {
        writer: Arc::new(Mutex::new(writer)),
        snapshot: RwLock::new(Arc::new(snapshot)),
    }
}
