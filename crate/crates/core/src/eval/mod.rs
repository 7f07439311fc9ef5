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

//! Evaluation protocols: Self-BLEU diversity, entity controllability,
//! guided and marginalized perplexity, narrative cloze and schema overlap.

pub mod bleu;
pub mod cloze;
pub mod control;
pub mod coref;
pub mod diversity;
pub mod overlap;
pub mod perplexity;

use thiserror::Error;

use crate::generation::{BackendError, GenerationError};

pub use bleu::{bleu, self_bleu};
pub use cloze::{narrative_cloze, ClozeReport};
pub use control::{controllability_eval, ControlProbe, ControlReport, DecodeMode, PresenceCriterion};
pub use coref::{entity_presence, ClusterCoref, CorefProvider, PositionalRoleTagger, PronounCoref, RoleTagger};
pub use diversity::{diversity_protocol, DiversityConfig, DiversityReport};
pub use overlap::{schema_overlap, GoldEvent, GoldSchema, SynonymMap};
pub use perplexity::{marginal_log_prob, perplexity, question_set, PerplexityMode, PerplexityReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("self-BLEU needs at least two sequences")]
    TooFewSequences,
    #[error("narrative cloze needs at least two documents")]
    TooFewDocuments,
    #[error("no applicable questions for instance of document {0}")]
    EmptyQuestionSet(String),
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}
