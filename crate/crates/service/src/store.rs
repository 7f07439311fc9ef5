// Copyright 2026 The evqa Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! In-memory session store with a write-ahead JSONL log per session.
//!
//! A mutation runs on a copy of the session. Backend failures leave both the
//! session and the log untouched; any other outcome, including a rejected
//! action, is appended to the log before the copy is committed, so replaying
//! the log reproduces the live state exactly.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;
use tracing::{info, warn};

use evqa::generation::{
    BackendError, Capabilities, DecodeConfig, GeneratorBackend, ScoredText, TokenScores, Variant,
};
use evqa::session::{
    parse_log, replay_log, start_session, LogKind, LogRecord, Session, SessionConfig, SessionError, SessionMetrics,
    UserAction, DEFAULT_TIME_BUDGET_SECS,
};

use crate::view::ApiSessionView;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Errors as the service reports them; each maps to one HTTP status.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Gone(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("generator backend unavailable: {0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl From<SessionError> for ServiceError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::EmptySeed => ServiceError::BadRequest(msg),
            SessionError::InvalidAction(_) => ServiceError::Unprocessable(msg),
            SessionError::SessionFinished => ServiceError::Gone(msg),
            SessionError::WrongState { .. } | SessionError::SessionNotFinished => ServiceError::Conflict(msg),
            SessionError::Backend(_) => ServiceError::Unavailable(msg),
            SessionError::CorruptLog { .. } => ServiceError::Internal(msg),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(format!("action log: {e}"))
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Directory for per-session action logs. `None` keeps sessions in
    /// memory only.
    pub log_dir: Option<PathBuf>,
    pub default_time_budget_secs: u64,
    pub decode: DecodeConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            log_dir: None,
            default_time_budget_secs: DEFAULT_TIME_BUDGET_SECS,
            decode: DecodeConfig::default(),
        }
    }
}

/// Serializes calls into a backend that cannot take concurrent requests.
struct Gated {
    inner: Arc<dyn GeneratorBackend>,
    gate: Option<Mutex<()>>,
}

impl Gated {
    fn with<T>(&self, f: impl FnOnce(&dyn GeneratorBackend) -> T) -> T {
        let _guard = self.gate.as_ref().map(|g| g.lock().unwrap_or_else(|p| p.into_inner()));
        f(self.inner.as_ref())
    }
}

impl GeneratorBackend for Gated {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn description(&self) -> String {
        self.inner.description()
    }
    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        self.with(|b| b.score(input, output))
    }
    fn sample(&self, input: &str, n: usize, cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        self.with(|b| b.sample(input, n, cfg))
    }
    fn beam(&self, input: &str, cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        self.with(|b| b.beam(input, cfg))
    }
}

type Reply = Result<ApiSessionView, ServiceError>;

struct Entry {
    session: Session,
    log_path: Option<PathBuf>,
    replies: HashMap<String, Reply>,
}

pub struct SessionStore {
    backend: Gated,
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    created: Mutex<HashMap<String, String>>,
}

#[derive(Debug, Clone)]
pub struct CreateParams {
    pub seed: String,
    pub variant: Variant,
    pub time_budget_secs: Option<u64>,
    pub rng_seed: Option<u64>,
    pub request_id: Option<String>,
}

fn append(path: &Path, record: &LogRecord) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(record.to_line().as_bytes())?;
    f.sync_data()
}

impl SessionStore {
    /// Opens the store and replays every log found in the log directory.
    pub fn open(
        backend: Arc<dyn GeneratorBackend>,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServiceError> {
        let gate = if backend.capabilities().concurrent { None } else { Some(Mutex::new(())) };
        let store = SessionStore {
            backend: Gated { inner: backend, gate },
            config,
            clock,
            sessions: RwLock::new(HashMap::new()),
            created: Mutex::new(HashMap::new()),
        };
        if let Some(dir) = store.config.log_dir.clone() {
            fs::create_dir_all(&dir)?;
            store.recover(&dir)?;
        }
        Ok(store)
    }

    fn recover(&self, dir: &Path) -> Result<(), ServiceError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path)?;
            let log = match parse_log(&text) {
                Ok(log) => log,
                Err(e) => {
                    warn!(path = %path.display(), error = %e, "skipping unreadable session log");
                    continue;
                }
            };
            let session = replay_log(&log, &self.backend)?;
            let now = self.clock.now_ms();
            let view = ApiSessionView::of(&session, now);
            let mut replies = HashMap::new();
            for rec in &log {
                if let Some(rid) = &rec.request_id {
                    if rec.kind == LogKind::Start {
                        self.created.lock().expect("lock").insert(rid.clone(), session.session_id.clone());
                    } else {
                        replies.insert(rid.clone(), Ok(view.clone()));
                    }
                }
            }
            info!(session = %session.session_id, records = log.len(), "recovered session");
            self.sessions.write().expect("lock").insert(
                session.session_id.clone(),
                Arc::new(Mutex::new(Entry {
                    session,
                    log_path: Some(path),
                    replies,
                })),
            );
        }
        Ok(())
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn backend_description(&self) -> String {
        self.backend.description()
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ServiceError> {
        self.sessions
            .read()
            .expect("lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Creates a session. The flag is false when `request_id` was already
    /// used and the existing session is returned.
    pub fn create(&self, params: CreateParams) -> Result<(ApiSessionView, bool), ServiceError> {
        if let Some(rid) = &params.request_id {
            let existing = self.created.lock().expect("lock").get(rid).cloned();
            if let Some(id) = existing {
                return Ok((self.get(&id)?, false));
            }
        }
        let config = SessionConfig {
            time_budget_secs: params.time_budget_secs.unwrap_or(self.config.default_time_budget_secs),
            rng_seed: params.rng_seed.unwrap_or(0),
            decode: self.config.decode.clone(),
        };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let now = self.clock.now_ms();
        let session = start_session(id.clone(), &params.seed, params.variant, config.clone(), &self.backend, now)?;
        let log_path = self.config.log_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")));
        if let Some(path) = &log_path {
            let record = LogRecord::start(now, &id, &session.seed, params.variant, &config)
                .with_request_id(params.request_id.clone());
            File::create(path)?;
            append(path, &record)?;
        }
        let view = ApiSessionView::of(&session, now);
        self.sessions.write().expect("lock").insert(
            id.clone(),
            Arc::new(Mutex::new(Entry {
                session,
                log_path,
                replies: HashMap::new(),
            })),
        );
        if let Some(rid) = params.request_id {
            self.created.lock().expect("lock").insert(rid, id);
        }
        Ok((view, true))
    }

    fn mutate(
        &self,
        id: &str,
        request_id: Option<String>,
        record: impl FnOnce(u64) -> LogRecord,
        apply: impl FnOnce(&mut Session, &dyn GeneratorBackend, u64) -> Result<(), SessionError>,
    ) -> Reply {
        let entry = self.entry(id)?;
        let mut e = entry.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reply) = request_id.as_ref().and_then(|r| e.replies.get(r)) {
            return reply.clone();
        }
        let now = self.clock.now_ms();
        let mut next = e.session.clone();
        let result = apply(&mut next, &self.backend, now);
        if let Err(err @ SessionError::Backend(_)) = result {
            return Err(err.into());
        }
        if let Some(path) = &e.log_path {
            append(path, &record(now).with_request_id(request_id.clone()))?;
        }
        e.session = next;
        let reply = result.map(|_| ApiSessionView::of(&e.session, now)).map_err(ServiceError::from);
        if let Some(rid) = request_id {
            e.replies.insert(rid, reply.clone());
        }
        reply
    }

    pub fn post_entity(&self, id: &str, entity: Option<String>, request_id: Option<String>) -> Reply {
        let sid = id.to_string();
        let logged = entity.clone();
        self.mutate(
            id,
            request_id,
            move |now| LogRecord::entity(now, &sid, logged.as_deref()),
            move |s, b, now| s.propose_candidates(entity.as_deref(), b, now),
        )
    }

    pub fn post_action(&self, id: &str, action: UserAction, request_id: Option<String>) -> Reply {
        let sid = id.to_string();
        let logged = action.clone();
        self.mutate(
            id,
            request_id,
            move |now| LogRecord::action(now, &sid, &logged),
            move |s, b, now| s.apply_action(&action, b, now),
        )
    }

    pub fn get(&self, id: &str) -> Reply {
        let entry = self.entry(id)?;
        let e = entry.lock().unwrap_or_else(|p| p.into_inner());
        Ok(ApiSessionView::of(&e.session, self.clock.now_ms()))
    }

    pub fn metrics(&self, id: &str) -> Result<SessionMetrics, ServiceError> {
        let entry = self.entry(id)?;
        let e = entry.lock().unwrap_or_else(|p| p.into_inner());
        Ok(e.session.metrics())
    }

    /// Full session state, for snapshots and tests.
    pub fn snapshot(&self, id: &str) -> Result<Session, ServiceError> {
        let entry = self.entry(id)?;
        let e = entry.lock().unwrap_or_else(|p| p.into_inner());
        Ok(e.session.clone())
    }
}
