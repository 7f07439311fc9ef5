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

//! Interactive schema-generation sessions.
//!
//! A session grows a tree of accepted events from a seed. At each step the
//! user is shown four sampled candidates and may select one, ask for new
//! ones, jump back to an earlier step, or stop. Guided variants first ask
//! for an entity of interest; QGELM then samples two candidates for the
//! agent question and two for the theme question.
//!
//! All time is passed in explicitly as milliseconds since the Unix epoch so
//! that a logged session replays exactly.

mod log;

pub use log::{parse_log, replay_log, LogKind, LogRecord, SessionLog};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::{derive_seed, sample_events, DecodeConfig, GenerationError, GeneratorBackend, PromptSpec, Variant, NO_ENTITY};
use crate::text;
use crate::types::{question_surface, QuestionKind};

pub const CANDIDATES_PER_STEP: usize = 4;
pub const DEFAULT_TIME_BUDGET_SECS: u64 = 240;
const EXTRA_DEDUP_ATTEMPTS: usize = 3;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("seed event must not be empty")]
    EmptySeed,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("session is finished")]
    SessionFinished,
    #[error("session is {actual:?}, expected {expected:?}")]
    WrongState { expected: SessionState, actual: SessionState },
    #[error("session is not finished")]
    SessionNotFinished,
    #[error("corrupt action log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("backend failure: {0}")]
    Backend(#[from] GenerationError),
}

impl SessionError {
    /// Errors that depend only on the session state and the request, as
    /// opposed to the backend or the log file.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            SessionError::EmptySeed
                | SessionError::InvalidAction(_)
                | SessionError::SessionFinished
                | SessionError::WrongState { .. }
                | SessionError::SessionNotFinished
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    AwaitingEntity,
    AwaitingAction,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UserAction {
    Select { index: usize },
    Regenerate,
    Return { step: usize },
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionNode {
    pub node_id: usize,
    pub event: String,
    /// `None` for the root.
    pub parent: Option<usize>,
    pub step_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub accepted_events: usize,
    pub rejected_steps: usize,
    pub pct_rejected: f64,
    pub resamples: usize,
    pub total_steps: usize,
    pub tree_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub time_budget_secs: u64,
    pub rng_seed: u64,
    pub decode: DecodeConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            time_budget_secs: DEFAULT_TIME_BUDGET_SECS,
            rng_seed: 0,
            decode: DecodeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub seed: String,
    pub variant: Variant,
    pub nodes: Vec<SessionNode>,
    pub cursor: usize,
    pub pending_candidates: Vec<String>,
    /// Entity the pending candidates were asked about, kept for regeneration.
    pub pending_entity: Option<String>,
    pub accepted_events: usize,
    pub rejected_steps: usize,
    pub resamples: usize,
    pub total_steps: usize,
    pub started_at_ms: u64,
    pub state: SessionState,
    pub config: SessionConfig,
    /// Number of candidate sets drawn so far; keys the sampling seeds.
    pub proposals: u64,
}

fn asks_for_entity(variant: Variant) -> bool {
    variant.is_guided()
}

/// Opens a session rooted at `seed`.
pub fn start_session(
    session_id: impl Into<String>,
    seed: &str,
    variant: Variant,
    config: SessionConfig,
    backend: &dyn GeneratorBackend,
    now_ms: u64,
) -> Result<Session, SessionError> {
    let seed = seed.trim();
    if seed.is_empty() {
        return Err(SessionError::EmptySeed);
    }
    let mut session = Session {
        session_id: session_id.into(),
        seed: seed.to_string(),
        variant,
        nodes: vec![SessionNode {
            node_id: 0,
            event: seed.to_string(),
            parent: None,
            step_index: 0,
        }],
        cursor: 0,
        pending_candidates: Vec::new(),
        pending_entity: None,
        accepted_events: 0,
        rejected_steps: 0,
        resamples: 0,
        total_steps: 0,
        started_at_ms: now_ms,
        state: SessionState::AwaitingEntity,
        config,
        proposals: 0,
    };
    session.prepare_step(backend)?;
    Ok(session)
}

impl Session {
    pub fn deadline_ms(&self) -> u64 {
        self.started_at_ms.saturating_add(self.config.time_budget_secs.saturating_mul(1000))
    }

    pub fn seconds_remaining(&self, now_ms: u64) -> u64 {
        if self.state == SessionState::Finished {
            return 0;
        }
        self.deadline_ms().saturating_sub(now_ms).div_ceil(1000)
    }

    /// Finishes the session if its time budget has run out.
    pub fn expire_if_due(&mut self, now_ms: u64) -> bool {
        if self.state != SessionState::Finished && now_ms >= self.deadline_ms() {
            self.finish();
            true
        } else {
            false
        }
    }

    fn finish(&mut self) {
        self.state = SessionState::Finished;
        self.pending_candidates.clear();
        self.pending_entity = None;
    }

    /// Event texts from the root to `node`.
    pub fn path_to(&self, node: usize) -> Vec<String> {
        let mut path = Vec::new();
        let mut cur = Some(node);
        while let Some(id) = cur {
            path.push(self.nodes[id].event.clone());
            cur = self.nodes[id].parent;
        }
        path.reverse();
        path
    }

    pub fn context(&self) -> Vec<String> {
        self.path_to(self.cursor)
    }

    /// Step index of the most recent step, i.e. the number of steps taken.
    pub fn step_index(&self) -> usize {
        self.total_steps
    }

    pub fn tree_depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                depth[n.node_id] = depth[p] + 1;
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Current counters, whether or not the session has finished.
    pub fn metrics(&self) -> SessionMetrics {
        let pct_rejected = if self.total_steps == 0 {
            0.0
        } else {
            100.0 * self.rejected_steps as f64 / self.total_steps as f64
        };
        SessionMetrics {
            accepted_events: self.accepted_events,
            rejected_steps: self.rejected_steps,
            pct_rejected,
            resamples: self.resamples,
            total_steps: self.total_steps,
            tree_depth: self.tree_depth(),
        }
    }

    pub fn finalize_metrics(&self) -> Result<SessionMetrics, SessionError> {
        if self.state != SessionState::Finished {
            return Err(SessionError::SessionNotFinished);
        }
        Ok(self.metrics())
    }

    fn prepare_step(&mut self, backend: &dyn GeneratorBackend) -> Result<(), SessionError> {
        self.pending_candidates.clear();
        self.pending_entity = None;
        if asks_for_entity(self.variant) {
            self.state = SessionState::AwaitingEntity;
            Ok(())
        } else {
            self.draw(backend, None)
        }
    }

    fn guidance_plan(&self, entity: Option<&str>) -> Vec<Option<String>> {
        match (self.variant, entity) {
            (Variant::Elm, _) => vec![None; CANDIDATES_PER_STEP],
            (Variant::Qgelm, Some(e)) => {
                let agent = question_surface(QuestionKind::Agent, e);
                let theme = question_surface(QuestionKind::Theme, e);
                vec![Some(agent.clone()), Some(agent), Some(theme.clone()), Some(theme)]
            }
            (Variant::Qgelm, None) => vec![Some(question_surface(QuestionKind::Generic, "")); CANDIDATES_PER_STEP],
            (Variant::Egelm, e) => vec![Some(e.unwrap_or(NO_ENTITY).to_string()); CANDIDATES_PER_STEP],
        }
    }

    fn draw(&mut self, backend: &dyn GeneratorBackend, entity: Option<String>) -> Result<(), SessionError> {
        let context = self.context();
        let proposal = self.proposals;
        let mut candidates: Vec<String> = Vec::with_capacity(CANDIDATES_PER_STEP);
        for (slot, guidance) in self.guidance_plan(entity.as_deref()).into_iter().enumerate() {
            let input = PromptSpec::new(self.variant, context.clone(), guidance)?.render(&self.config.decode)?;
            let mut chosen = String::new();
            for attempt in 0..=EXTRA_DEDUP_ATTEMPTS {
                let seed = derive_seed(self.config.rng_seed, &[proposal, slot as u64, attempt as u64]);
                let cfg = self.config.decode.with_seed(seed);
                chosen = sample_events(backend, &input, 1, &cfg).map_err(GenerationError::from)?.remove(0);
                if !candidates.iter().any(|c| text::same_text(c, &chosen)) {
                    break;
                }
            }
            candidates.push(chosen);
        }
        self.proposals += 1;
        self.pending_candidates = candidates;
        self.pending_entity = entity;
        self.state = SessionState::AwaitingAction;
        Ok(())
    }

    /// Samples four candidates about `entity` (`None` for "none").
    pub fn propose_candidates(
        &mut self,
        entity: Option<&str>,
        backend: &dyn GeneratorBackend,
        now_ms: u64,
    ) -> Result<(), SessionError> {
        if self.expire_if_due(now_ms) || self.state == SessionState::Finished {
            return Err(SessionError::SessionFinished);
        }
        if self.state != SessionState::AwaitingEntity {
            return Err(SessionError::WrongState {
                expected: SessionState::AwaitingEntity,
                actual: self.state,
            });
        }
        let entity = entity
            .map(str::trim)
            .filter(|e| !e.is_empty() && !e.eq_ignore_ascii_case(NO_ENTITY))
            .map(str::to_string);
        self.draw(backend, entity)
    }

    pub fn apply_action(
        &mut self,
        action: &UserAction,
        backend: &dyn GeneratorBackend,
        now_ms: u64,
    ) -> Result<(), SessionError> {
        if *action == UserAction::Stop {
            if self.state == SessionState::Finished {
                return Err(SessionError::SessionFinished);
            }
            self.finish();
            return Ok(());
        }
        if self.expire_if_due(now_ms) || self.state == SessionState::Finished {
            return Err(SessionError::SessionFinished);
        }
        match action {
            UserAction::Select { index } => {
                self.expect_state(SessionState::AwaitingAction)?;
                let event = self
                    .pending_candidates
                    .get(*index)
                    .cloned()
                    .ok_or_else(|| SessionError::InvalidAction(format!("no candidate {index}")))?;
                self.total_steps += 1;
                self.accepted_events += 1;
                let node_id = self.nodes.len();
                self.nodes.push(SessionNode {
                    node_id,
                    event,
                    parent: Some(self.cursor),
                    step_index: self.total_steps,
                });
                self.cursor = node_id;
                self.prepare_step(backend)
            }
            UserAction::Regenerate => {
                self.expect_state(SessionState::AwaitingAction)?;
                let entity = self.pending_entity.clone();
                self.total_steps += 1;
                self.rejected_steps += 1;
                self.resamples += 1;
                self.draw(backend, entity)
            }
            UserAction::Return { step } => {
                let target = self
                    .nodes
                    .iter()
                    .find(|n| n.step_index == *step)
                    .map(|n| n.node_id)
                    .ok_or_else(|| SessionError::InvalidAction(format!("no event was accepted at step {step}")))?;
                self.total_steps += 1;
                self.rejected_steps += 1;
                self.cursor = target;
                self.prepare_step(backend)
            }
            UserAction::Stop => unreachable!(),
        }
    }

    fn expect_state(&self, expected: SessionState) -> Result<(), SessionError> {
        if self.state == expected {
            Ok(())
        } else {
            Err(SessionError::WrongState {
                expected,
                actual: self.state,
            })
        }
    }

    pub fn to_snapshot(&self) -> String {
        serde_json::to_string(self).expect("session serializes")
    }

    pub fn from_snapshot(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
