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

use super::{DecodeConfig, GenerationError, Variant};
use crate::types::InstanceRecord;

/// Separates consecutive context events.
pub const EVENT_JOINER: &str = " . ";
/// Separates the context from the guidance.
pub const SEP: &str = " [SEP] ";
/// Entity guidance used by EGELM when no entity is given.
pub const NO_ENTITY: &str = "none";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    variant: Variant,
    context: Vec<String>,
    guidance: Option<String>,
}

impl PromptSpec {
    pub fn new(variant: Variant, context: Vec<String>, guidance: Option<String>) -> Result<Self, GenerationError> {
        if variant.is_guided() != guidance.is_some() {
            return Err(GenerationError::GuidanceMismatch);
        }
        if context.is_empty() {
            return Err(GenerationError::EmptyContext);
        }
        Ok(PromptSpec {
            variant,
            context,
            guidance,
        })
    }

    /// The prompt an instance is trained and scored under: its question for
    /// QGELM, its entity (or [`NO_ENTITY`]) for EGELM, nothing for ELM.
    pub fn for_instance(variant: Variant, record: &InstanceRecord) -> Result<Self, GenerationError> {
        let guidance = match variant {
            Variant::Elm => None,
            Variant::Egelm => Some(record.question.entity.clone().unwrap_or_else(|| NO_ENTITY.to_string())),
            Variant::Qgelm => Some(record.question.surface.clone()),
        };
        PromptSpec::new(variant, record.context.clone(), guidance)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn context(&self) -> &[String] {
        &self.context
    }

    pub fn guidance(&self) -> Option<&str> {
        self.guidance.as_deref()
    }

    /// Formats with the whitespace token counter.
    pub fn render(&self, cfg: &DecodeConfig) -> Result<String, GenerationError> {
        format_input(self, cfg, &crate::text::whitespace_token_count)
    }
}

fn assemble(events: &[String], guidance: Option<&str>) -> String {
    let mut out = events.iter().map(|e| e.trim()).collect::<Vec<_>>().join(EVENT_JOINER);
    if let Some(g) = guidance {
        out.push_str(SEP);
        out.push_str(g.trim());
    }
    out
}

/// Builds the model input, dropping whole events from the front of the
/// context until the token count fits `cfg.max_input_tokens`. The guidance
/// is never truncated.
pub fn format_input(
    spec: &PromptSpec,
    cfg: &DecodeConfig,
    count_tokens: &dyn Fn(&str) -> usize,
) -> Result<String, GenerationError> {
    let budget = cfg.max_input_tokens;
    for start in 0..spec.context.len() {
        let candidate = assemble(&spec.context[start..], spec.guidance());
        if count_tokens(&candidate) <= budget {
            return Ok(candidate);
        }
    }
    Err(GenerationError::ContextOverflow { budget })
}

/// Splits a formatted prompt back into context events and guidance.
pub fn split_prompt(input: &str, guided: bool) -> (Vec<&str>, Option<&str>) {
    let (context, guidance) = match (guided, input.rfind(SEP)) {
        (true, Some(at)) => (&input[..at], Some(&input[at + SEP.len()..])),
        _ => (input, None),
    };
    (context.split(EVENT_JOINER).collect(), guidance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::whitespace_token_count;
    use proptest::prelude::*;

    fn cfg(budget: usize) -> DecodeConfig {
        DecodeConfig {
            max_input_tokens: budget,
            ..DecodeConfig::default()
        }
    }

    #[test]
    fn qgelm_format() {
        let spec = PromptSpec::new(
            Variant::Qgelm,
            vec!["the thief stole a rifle".into()],
            Some("what else did the thief do?".into()),
        )
        .unwrap();
        assert_eq!(
            spec.render(&cfg(512)).unwrap(),
            "the thief stole a rifle [SEP] what else did the thief do?"
        );
    }

    #[test]
    fn elm_format() {
        let spec = PromptSpec::new(Variant::Elm, vec!["the thief stole a rifle".into(), "he fled".into()], None).unwrap();
        assert_eq!(spec.render(&cfg(512)).unwrap(), "the thief stole a rifle . he fled");
    }

    #[test]
    fn guidance_invariant() {
        assert!(matches!(
            PromptSpec::new(Variant::Elm, vec!["a b".into()], Some("x".into())),
            Err(GenerationError::GuidanceMismatch)
        ));
        assert!(matches!(
            PromptSpec::new(Variant::Qgelm, vec!["a b".into()], None),
            Err(GenerationError::GuidanceMismatch)
        ));
        assert!(matches!(
            PromptSpec::new(Variant::Elm, vec![], None),
            Err(GenerationError::EmptyContext)
        ));
    }

    #[test]
    fn overflow_when_single_event_too_long() {
        let spec = PromptSpec::new(Variant::Qgelm, vec!["a b c d e".into()], Some("what else happened?".into())).unwrap();
        assert!(matches!(spec.render(&cfg(6)), Err(GenerationError::ContextOverflow { budget: 6 })));
        assert!(spec.render(&cfg(9)).is_ok());
    }

    #[test]
    fn hundred_events_truncate_from_front() {
        let context: Vec<String> = (0..100).map(|i| format!("actor{i} did thing{i} to target{i}")).collect();
        let spec = PromptSpec::new(Variant::Qgelm, context.clone(), Some("what else did actor99 do?".into())).unwrap();
        let out = spec.render(&cfg(512)).unwrap();
        assert!(whitespace_token_count(&out) <= 512);
        let (events, guidance) = split_prompt(&out, true);
        assert_eq!(guidance, Some("what else did actor99 do?"));
        assert_eq!(events, context[100 - events.len()..].iter().map(String::as_str).collect::<Vec<_>>());
        // one more event would not fit
        let more = assemble(&context[100 - events.len() - 1..], spec.guidance());
        assert!(whitespace_token_count(&more) > 512);
    }

    proptest! {
        #[test]
        fn truncation_keeps_whole_events(n in 1usize..40, len in 1usize..8, budget in 10usize..80) {
            let context: Vec<String> = (0..n).map(|i| (0..len).map(|j| format!("w{i}x{j}")).collect::<Vec<_>>().join(" ")).collect();
            let spec = PromptSpec::new(Variant::Egelm, context.clone(), Some("the mayor".into())).unwrap();
            match spec.render(&cfg(budget)) {
                Ok(out) => {
                    prop_assert!(whitespace_token_count(&out) <= budget);
                    let (events, guidance) = split_prompt(&out, true);
                    prop_assert_eq!(guidance, Some("the mayor"));
                    let tail: Vec<&str> = context[n - events.len()..].iter().map(String::as_str).collect();
                    prop_assert_eq!(events, tail);
                }
                Err(GenerationError::ContextOverflow { .. }) => {
                    prop_assert!(len + 1 + 2 > budget);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
