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

//! Append-only JSONL action log and deterministic replay.
//!
//! Every request is logged before it is applied, including requests that
//! then fail. Replay applies them in order and skips the same domain errors
//! the live run returned, so the final state is identical.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{start_session, Session, SessionConfig, SessionError, UserAction};
use crate::generation::{GeneratorBackend, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogKind {
    Start,
    Entity,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts: u64,
    pub session_id: String,
    pub kind: LogKind,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StartPayload {
    seed: String,
    variant: Variant,
    config: SessionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntityPayload {
    entity: Option<String>,
}

impl LogRecord {
    pub fn start(ts: u64, session_id: &str, seed: &str, variant: Variant, config: &SessionConfig) -> Self {
        let payload = StartPayload {
            seed: seed.to_string(),
            variant,
            config: config.clone(),
        };
        Self::new(ts, session_id, LogKind::Start, serde_json::to_value(payload).expect("payload serializes"))
    }

    pub fn entity(ts: u64, session_id: &str, entity: Option<&str>) -> Self {
        let payload = EntityPayload {
            entity: entity.map(str::to_string),
        };
        Self::new(ts, session_id, LogKind::Entity, serde_json::to_value(payload).expect("payload serializes"))
    }

    pub fn action(ts: u64, session_id: &str, action: &UserAction) -> Self {
        Self::new(ts, session_id, LogKind::Action, serde_json::to_value(action).expect("payload serializes"))
    }

    fn new(ts: u64, session_id: &str, kind: LogKind, payload: Value) -> Self {
        LogRecord {
            ts,
            session_id: session_id.to_string(),
            kind,
            payload,
            request_id: None,
        }
    }

    pub fn with_request_id(mut self, id: Option<String>) -> Self {
        self.request_id = id;
        self
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("log record serializes");
        s.push('\n');
        s
    }
}

/// Records of one session, in order.
pub type SessionLog = Vec<LogRecord>;

/// Parses a JSONL log. Any line that is not a complete record, a missing
/// start record, or records from several sessions make the log corrupt.
pub fn parse_log(text: &str) -> Result<SessionLog, SessionError> {
    let corrupt = |line: usize, message: String| SessionError::CorruptLog { line, message };
    let mut records: SessionLog = Vec::new();
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if !raw.ends_with('\n') {
            return Err(corrupt(line, "truncated record".into()));
        }
        let rec: LogRecord = serde_json::from_str(raw.trim_end()).map_err(|e| corrupt(line, e.to_string()))?;
        match (records.first(), rec.kind) {
            (None, LogKind::Start) => {}
            (None, _) => return Err(corrupt(line, "log must begin with a start record".into())),
            (Some(_), LogKind::Start) => return Err(corrupt(line, "second start record".into())),
            (Some(first), _) if first.session_id != rec.session_id => {
                return Err(corrupt(line, format!("record for session {}", rec.session_id)))
            }
            _ => {}
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(corrupt(0, "empty log".into()));
    }
    Ok(records)
}

/// Rebuilds a session from its log.
pub fn replay_log(log: &[LogRecord], backend: &dyn GeneratorBackend) -> Result<Session, SessionError> {
    let corrupt = |line: usize, message: String| SessionError::CorruptLog { line, message };
    let first = log.first().ok_or_else(|| corrupt(0, "empty log".into()))?;
    if first.kind != LogKind::Start {
        return Err(corrupt(1, "log must begin with a start record".into()));
    }
    let start: StartPayload = serde_json::from_value(first.payload.clone()).map_err(|e| corrupt(1, e.to_string()))?;
    let mut session = start_session(first.session_id.clone(), &start.seed, start.variant, start.config, backend, first.ts)?;
    for (i, rec) in log.iter().enumerate().skip(1) {
        let result = match rec.kind {
            LogKind::Entity => {
                let p: EntityPayload = serde_json::from_value(rec.payload.clone()).map_err(|e| corrupt(i + 1, e.to_string()))?;
                session.propose_candidates(p.entity.as_deref(), backend, rec.ts)
            }
            LogKind::Action => {
                let a: UserAction = serde_json::from_value(rec.payload.clone()).map_err(|e| corrupt(i + 1, e.to_string()))?;
                session.apply_action(&a, backend, rec.ts)
            }
            LogKind::Start => return Err(corrupt(i + 1, "second start record".into())),
        };
        match result {
            Err(e) if !e.is_domain() => return Err(e),
            _ => {}
        }
    }
    Ok(session)
}
