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

//! Diversity of sampled event sequences, measured with Self-BLEU.
//!
//! From each single-event context, `k` sequences of every length
//! `1..=max_length` are sampled one event at a time. Guided variants pick a
//! random entity (EGELM) or question (QGELM) before each step, from the
//! lexicon entities mentioned in the latest event, or anywhere in the
//! history when the latest event names none.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bleu::self_bleu;
use super::EvalError;
use crate::generation::{derive_seed, sample_events, DecodeConfig, GeneratorBackend, PromptSpec, Variant, EVENT_JOINER, NO_ENTITY};
use crate::text;
use crate::types::{question_surface, QuestionKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityConfig {
    pub max_length: usize,
    pub sequences_per_context: usize,
    pub max_n: usize,
    pub seed: u64,
    pub decode: DecodeConfig,
    /// Known entity surface forms used to pick guidance.
    pub entity_lexicon: Vec<String>,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig {
            max_length: 10,
            sequences_per_context: 5,
            max_n: 3,
            seed: 0,
            decode: DecodeConfig::default(),
            entity_lexicon: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    /// Mean Self-BLEU per sequence length, in [0, 100].
    pub per_length: BTreeMap<usize, f64>,
    pub num_contexts: usize,
    pub sequences_per_context: usize,
}

fn entities_in(event: &str, lexicon: &[String]) -> Vec<String> {
    lexicon
        .iter()
        .filter(|e| text::contains_phrase(event, e))
        .cloned()
        .collect()
}

fn pick_guidance(variant: Variant, history: &[String], lexicon: &[String], rng: &mut ChaCha8Rng) -> Option<String> {
    if !variant.is_guided() {
        return None;
    }
    let mut candidates = history.last().map(|e| entities_in(e, lexicon)).unwrap_or_default();
    if candidates.is_empty() {
        for h in history.iter().rev() {
            for e in entities_in(h, lexicon) {
                if !candidates.contains(&e) {
                    candidates.push(e);
                }
            }
        }
    }
    match variant {
        Variant::Egelm => Some(candidates.choose(rng).cloned().unwrap_or_else(|| NO_ENTITY.to_string())),
        Variant::Qgelm => {
            let mut questions: Vec<String> = candidates
                .iter()
                .flat_map(|e| [question_surface(QuestionKind::Agent, e), question_surface(QuestionKind::Theme, e)])
                .collect();
            questions.push(question_surface(QuestionKind::Generic, ""));
            questions.choose(rng).cloned()
        }
        Variant::Elm => None,
    }
}

/// Samples one sequence of `length` events after `context`.
pub fn sample_sequence(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    context: &str,
    length: usize,
    lexicon: &[String],
    decode: &DecodeConfig,
    seed: u64,
) -> Result<Vec<String>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = vec![context.to_string()];
    let mut generated = Vec::with_capacity(length);
    for step in 0..length {
        let guidance = pick_guidance(variant, &history, lexicon, &mut rng);
        let input = PromptSpec::new(variant, history.clone(), guidance)?.render(decode)?;
        let cfg = decode.with_seed(derive_seed(seed, &[step as u64]));
        let event = sample_events(backend, &input, 1, &cfg)?.remove(0);
        history.push(event.clone());
        generated.push(event);
    }
    Ok(generated)
}

pub fn diversity_protocol(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    contexts: &[String],
    cfg: &DiversityConfig,
) -> Result<DiversityReport, EvalError> {
    if contexts.is_empty() {
        return Err(EvalError::EmptyInput("contexts"));
    }
    let mut per_length = BTreeMap::new();
    for length in 1..=cfg.max_length {
        let mut total = 0.0;
        for (c, context) in contexts.iter().enumerate() {
            let mut seqs = Vec::with_capacity(cfg.sequences_per_context);
            for s in 0..cfg.sequences_per_context {
                let seed = derive_seed(cfg.seed, &[c as u64, length as u64, s as u64]);
                let events = sample_sequence(backend, variant, context, length, &cfg.entity_lexicon, &cfg.decode, seed)?;
                seqs.push(events.join(EVENT_JOINER));
            }
            total += self_bleu(&seqs, cfg.max_n)?;
        }
        per_length.insert(length, total / contexts.len() as f64);
    }
    Ok(DiversityReport {
        per_length,
        num_contexts: contexts.len(),
        sequences_per_context: cfg.sequences_per_context,
    })
}
