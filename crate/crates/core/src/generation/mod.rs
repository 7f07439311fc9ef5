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

//! Prompt construction, the generator backend contract and decoding.
//!
//! Three model variants share one input format: the context events joined
//! by [`EVENT_JOINER`], followed for the guided variants by [`SEP`] and the
//! guidance (an entity for EGELM, a question for QGELM).

mod backend;
pub mod ipc;
mod prompt;
pub mod reference;
pub mod scripted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    beam_events, sample_events, score_sequence, BackendError, Capabilities, GeneratorBackend, ScoredText,
    TokenScores,
};
pub use prompt::{format_input, split_prompt, PromptSpec, EVENT_JOINER, NO_ENTITY, SEP};
pub use reference::{fit_reference_backend, training_pairs, ReferenceBackend, TrainingPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Next event from the context alone.
    Elm,
    /// Next event given the context and one of its entities.
    Egelm,
    /// Next event given the context and a question about an entity.
    Qgelm,
}

impl Variant {
    pub fn is_guided(self) -> bool {
        self != Variant::Elm
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Elm => "elm",
            Variant::Egelm => "egelm",
            Variant::Qgelm => "qgelm",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "elm" => Ok(Variant::Elm),
            "egelm" => Ok(Variant::Egelm),
            "qgelm" => Ok(Variant::Qgelm),
            other => Err(format!("unknown variant {other:?} (expected elm, egelm or qgelm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub max_input_tokens: usize,
    pub max_output_tokens: usize,
    pub beam_size: usize,
    pub num_samples: usize,
    pub random_seed: u64,
    /// Nucleus mass kept when sampling; 1.0 samples from the full
    /// distribution.
    pub top_p: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_input_tokens: 512,
            max_output_tokens: 50,
            beam_size: 5,
            num_samples: 1,
            random_seed: 0,
            top_p: 0.9,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let counts = [
            ("max_input_tokens", self.max_input_tokens),
            ("max_output_tokens", self.max_output_tokens),
            ("beam_size", self.beam_size),
            ("num_samples", self.num_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(GenerationError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GenerationError::InvalidConfig("top_p must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DecodeConfig {
            random_seed: seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("context does not fit in {budget} tokens even with a single event")]
    ContextOverflow { budget: usize },
    #[error("prompt needs at least one context event")]
    EmptyContext,
    #[error("guidance must be given exactly for the guided variants")]
    GuidanceMismatch,
    #[error("no training instances")]
    EmptyTrainingSet,
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("backend file: {0}")]
    Format(#[from] serde_json::Error),
}

/// Stable 64-bit FNV-1a, used to derive seeds and pseudo-random scores.
pub(crate) fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for part in parts {
        for b in part.iter() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derives a child seed from a base seed and a label path.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    let mut bytes = Vec::with_capacity(8 * (labels.len() + 1));
    bytes.extend_from_slice(&base.to_le_bytes());
    for l in labels {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    fnv1a(&[&bytes])
}
