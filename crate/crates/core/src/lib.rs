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

//! # evqa
//!
//! Question-guided event language modeling workbench.
//!
//! - [`ingest`] loads pre-annotated documents (tokens, roles, coreference,
//!   OpenIE tuples).
//! - [`pipeline`] mines (Context, Question, Answer) instances.
//! - [`generation`] builds prompts for the ELM / EGELM / QGELM variants and
//!   defines the generator backend contract, with an n-gram reference backend.
//! - [`eval`] implements diversity, controllability, perplexity, narrative
//!   cloze and schema overlap.
//! - [`session`] is the interactive schema-generation state machine.

pub mod eval;
pub mod generation;
pub mod ingest;
pub mod pipeline;
pub mod session;
pub mod synthetic;
pub mod text;
pub mod types;

pub use types::{
    parse_event_text, serialize_event, CqaInstance, Event, InstanceRecord, Question, QuestionKind, Role,
};
