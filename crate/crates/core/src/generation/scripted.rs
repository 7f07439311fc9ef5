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

//! Backends with closed-form behavior, for metric oracles and demos.

use std::collections::HashSet;

use super::backend::{BackendError, Capabilities, GeneratorBackend, ScoredText, TokenScores};
use super::prompt::split_prompt;
use super::{fnv1a, DecodeConfig};
use crate::text;
use crate::types::parse_question_surface;

fn per_token(output: &str, value: f64) -> TokenScores {
    TokenScores::from_tokens(vec![value; text::tokens(output).len()])
}

/// Entity named by the guidance of a prompt, whether it is a question or a
/// bare entity.
pub fn guidance_entity(input: &str) -> Option<String> {
    let (_, guidance) = split_prompt(input, true);
    let g = guidance?.trim();
    match parse_question_surface(g) {
        Some((_, entity)) => entity,
        None => Some(g.to_string()),
    }
}

/// Always emits `"<entity> acted"` for the entity in the guidance.
#[derive(Debug, Clone, Default)]
pub struct EchoBackend;

impl EchoBackend {
    fn emit(input: &str) -> String {
        match guidance_entity(input) {
            Some(e) => format!("{e} acted"),
            None => "someone acted".to_string(),
        }
    }
}

impl GeneratorBackend for EchoBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }
    fn description(&self) -> String {
        "echo backend".into()
    }
    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        let v = if text::same_text(output, &Self::emit(input)) { 0.0 } else { -20.0 };
        Ok(per_token(output, v))
    }
    fn sample(&self, input: &str, n: usize, _cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        Ok(vec![Self::emit(input); n])
    }
    fn beam(&self, input: &str, _cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        Ok(vec![ScoredText {
            text: Self::emit(input),
            score: 0.0,
        }])
    }
}

/// Emits one fixed event regardless of input.
#[derive(Debug, Clone)]
pub struct ConstantBackend {
    pub text: String,
}

impl ConstantBackend {
    pub fn new(text: impl Into<String>) -> Self {
        ConstantBackend { text: text.into() }
    }

    /// A backend whose output never mentions any participant.
    pub fn suppressor() -> Self {
        ConstantBackend::new("nothing happened")
    }
}

impl GeneratorBackend for ConstantBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }
    fn description(&self) -> String {
        format!("constant backend ({:?})", self.text)
    }
    fn score(&self, _input: &str, output: &str) -> Result<TokenScores, BackendError> {
        let v = if text::same_text(output, &self.text) { 0.0 } else { -20.0 };
        Ok(per_token(output, v))
    }
    fn sample(&self, _input: &str, n: usize, _cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        Ok(vec![self.text.clone(); n])
    }
    fn beam(&self, _input: &str, _cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        Ok(vec![ScoredText {
            text: self.text.clone(),
            score: 0.0,
        }])
    }
}

/// Scores known gold (input, output) pairs at 0 and everything else far
/// below.
#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    gold: HashSet<(String, String)>,
}

impl OracleScorer {
    pub fn new(gold: impl IntoIterator<Item = (String, String)>) -> Self {
        OracleScorer {
            gold: gold
                .into_iter()
                .map(|(i, o)| (i, text::normalize(&o)))
                .collect(),
        }
    }
}

impl GeneratorBackend for OracleScorer {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            score: true,
            sample: false,
            beam: false,
            concurrent: true,
        }
    }
    fn description(&self) -> String {
        format!("oracle scorer ({} gold pairs)", self.gold.len())
    }
    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        let hit = self.gold.contains(&(input.to_string(), text::normalize(output)));
        Ok(per_token(output, if hit { 0.0 } else { -1e6 }))
    }
}

/// Scores every (input, output) pair with an independent uniform draw
/// derived from a seed, so the same pair always gets the same score.
#[derive(Debug, Clone)]
pub struct UniformRandomScorer {
    pub seed: u64,
}

impl GeneratorBackend for UniformRandomScorer {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            score: true,
            sample: false,
            beam: false,
            concurrent: true,
        }
    }
    fn description(&self) -> String {
        format!("uniform random scorer (seed {})", self.seed)
    }
    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        let h = fnv1a(&[&self.seed.to_le_bytes(), input.as_bytes(), output.as_bytes()]);
        // 53 high bits -> (0, 1)
        let u = ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        Ok(TokenScores {
            total: u.ln(),
            per_token: vec![u.ln()],
        })
    }
}
