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

//! Session service: an HTTP API over [`evqa::session`] with a write-ahead
//! action log per session, plus the terminal loop used by `serve --tty`.

mod api;
mod store;
mod tty;
mod view;

pub use api::{router, serve};
pub use store::{Clock, CreateParams, ServiceConfig, ServiceError, SessionStore, SystemClock};
pub use tty::{run_tty, TtyError};
pub use view::{ApiSessionView, CandidateView, NodeView};
