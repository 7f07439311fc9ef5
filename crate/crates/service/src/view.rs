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

use serde::{Deserialize, Serialize};

use evqa::generation::Variant;
use evqa::session::{Session, SessionMetrics, SessionState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub node_id: usize,
    pub event: String,
    pub step_index: usize,
    pub children: Vec<NodeView>,
}

/// What clients see of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSessionView {
    pub session_id: String,
    pub state: SessionState,
    pub variant: Variant,
    pub step_index: usize,
    pub cursor: usize,
    pub entity: Option<String>,
    pub candidates: Vec<CandidateView>,
    pub tree: NodeView,
    pub metrics: SessionMetrics,
    pub seconds_remaining: u64,
}

fn node_view(session: &Session, id: usize) -> NodeView {
    let node = &session.nodes[id];
    NodeView {
        node_id: node.node_id,
        event: node.event.clone(),
        step_index: node.step_index,
        children: session
            .nodes
            .iter()
            .filter(|n| n.parent == Some(id))
            .map(|n| node_view(session, n.node_id))
            .collect(),
    }
}

impl ApiSessionView {
    pub fn of(session: &Session, now_ms: u64) -> Self {
        ApiSessionView {
            session_id: session.session_id.clone(),
            state: session.state,
            variant: session.variant,
            step_index: session.step_index(),
            cursor: session.cursor,
            entity: session.pending_entity.clone(),
            candidates: session
                .pending_candidates
                .iter()
                .enumerate()
                .map(|(index, text)| CandidateView {
                    index,
                    text: text.clone(),
                })
                .collect(),
            tree: node_view(session, 0),
            metrics: session.metrics(),
            seconds_remaining: session.seconds_remaining(now_ms),
        }
    }
}
