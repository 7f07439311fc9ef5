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
use thiserror::Error;

use super::DecodeConfig;
use crate::text::whitespace_token_count;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error("backend failure: {0}")]
    Failure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub score: bool,
    pub sample: bool,
    pub beam: bool,
    /// False when calls must be serialized by the caller.
    pub concurrent: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        score: true,
        sample: true,
        beam: true,
        concurrent: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScores {
    pub total: f64,
    pub per_token: Vec<f64>,
}

impl TokenScores {
    pub fn empty() -> Self {
        TokenScores {
            total: 0.0,
            per_token: Vec::new(),
        }
    }

    pub fn from_tokens(per_token: Vec<f64>) -> Self {
        TokenScores {
            total: per_token.iter().sum(),
            per_token,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text: String,
    pub score: f64,
}

/// A conditional event generator and scorer.
///
/// `input` is always a prompt produced by [`super::format_input`]. Scores
/// are natural-log probabilities of the output tokens given the input.
pub trait GeneratorBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn description(&self) -> String;

    fn score(&self, _input: &str, _output: &str) -> Result<TokenScores, BackendError> {
        Err(BackendError::Unsupported("score"))
    }

    /// `n` independent samples, reproducible for a fixed
    /// `cfg.random_seed`.
    fn sample(&self, _input: &str, _n: usize, _cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        Err(BackendError::Unsupported("sample"))
    }

    /// Up to `cfg.beam_size` outputs, best first.
    fn beam(&self, _input: &str, _cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        Err(BackendError::Unsupported("beam"))
    }
}

impl<B: GeneratorBackend + ?Sized> GeneratorBackend for Box<B> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn description(&self) -> String {
        (**self).description()
    }
    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        (**self).score(input, output)
    }
    fn sample(&self, input: &str, n: usize, cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        (**self).sample(input, n, cfg)
    }
    fn beam(&self, input: &str, cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        (**self).beam(input, cfg)
    }
}

impl<B: GeneratorBackend + ?Sized> GeneratorBackend for std::sync::Arc<B> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn description(&self) -> String {
        (**self).description()
    }
    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        (**self).score(input, output)
    }
    fn sample(&self, input: &str, n: usize, cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        (**self).sample(input, n, cfg)
    }
    fn beam(&self, input: &str, cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        (**self).beam(input, cfg)
    }
}

/// Scores `output_text` and checks the result is finite and additive.
pub fn score_sequence(
    backend: &dyn GeneratorBackend,
    input_text: &str,
    output_text: &str,
) -> Result<TokenScores, BackendError> {
    if !backend.capabilities().score {
        return Err(BackendError::Unsupported("score"));
    }
    if output_text.trim().is_empty() {
        return Ok(TokenScores::empty());
    }
    let scores = backend.score(input_text, output_text)?;
    if !scores.total.is_finite() || scores.per_token.iter().any(|v| !v.is_finite()) {
        return Err(BackendError::Failure("non-finite log-probability".into()));
    }
    Ok(scores)
}

fn clip_tokens(text: String, max: usize) -> String {
    if whitespace_token_count(&text) <= max {
        text
    } else {
        text.split_whitespace().take(max).collect::<Vec<_>>().join(" ")
    }
}

pub fn sample_events(
    backend: &dyn GeneratorBackend,
    input_text: &str,
    n: usize,
    cfg: &DecodeConfig,
) -> Result<Vec<String>, BackendError> {
    if !backend.capabilities().sample {
        return Err(BackendError::Unsupported("sample"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let out = backend.sample(input_text, n, cfg)?;
    if out.len() != n {
        return Err(BackendError::Failure(format!("asked for {n} samples, got {}", out.len())));
    }
    Ok(out.into_iter().map(|t| clip_tokens(t, cfg.max_output_tokens)).collect())
}

pub fn beam_events(
    backend: &dyn GeneratorBackend,
    input_text: &str,
    cfg: &DecodeConfig,
) -> Result<Vec<ScoredText>, BackendError> {
    if !backend.capabilities().beam {
        return Err(BackendError::Unsupported("beam"));
    }
    let mut out = backend.beam(input_text, cfg)?;
    out.truncate(cfg.beam_size);
    if out.windows(2).any(|w| w[0].score < w[1].score) {
        return Err(BackendError::Failure("beam output not sorted by score".into()));
    }
    Ok(out)
}
