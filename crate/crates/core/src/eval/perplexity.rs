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

//! Per-token perplexity of gold answers, either under each instance's own
//! guidance or marginalized over the applicable guidance set with a
//! uniform prior: `P(e|C) = 1/|Q'| * sum_q P(e|q,C)`.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::generation::{score_sequence, DecodeConfig, GeneratorBackend, PromptSpec, Variant, NO_ENTITY};
use crate::text;
use crate::types::{question_surface, InstanceRecord, QuestionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PerplexityMode {
    Guided,
    Marginalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub mode: PerplexityMode,
    pub per_token_ppl: f64,
    pub cloze_accuracy: Option<f64>,
    pub instances: usize,
    pub tokens: usize,
}

/// The guidance values marginalized over for one instance.
///
/// QGELM: agent and theme questions for each noun phrase of the last context
/// event, plus the generic question. EGELM: those noun phrases, plus the
/// no-entity guidance. ELM: a single empty guidance.
pub fn question_set(
    variant: Variant,
    record: &InstanceRecord,
    include_generic: bool,
) -> Result<Vec<Option<String>>, EvalError> {
    let set: Vec<Option<String>> = match variant {
        Variant::Elm => vec![None],
        Variant::Qgelm => {
            let mut qs: Vec<Option<String>> = record
                .context_entities
                .iter()
                .flat_map(|e| {
                    [
                        Some(question_surface(QuestionKind::Agent, e)),
                        Some(question_surface(QuestionKind::Theme, e)),
                    ]
                })
                .collect();
            if include_generic {
                qs.push(Some(question_surface(QuestionKind::Generic, "")));
            }
            qs
        }
        Variant::Egelm => {
            let mut es: Vec<Option<String>> = record.context_entities.iter().map(|e| Some(e.clone())).collect();
            if include_generic {
                es.push(Some(NO_ENTITY.to_string()));
            }
            es
        }
    };
    if set.is_empty() {
        return Err(EvalError::EmptyQuestionSet(record.document_id.clone()));
    }
    Ok(set)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln P(answer | context)` under the uniform mixture over
/// [`question_set`], and the number of answer tokens.
pub fn marginal_log_prob(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    record: &InstanceRecord,
    cfg: &DecodeConfig,
    include_generic: bool,
) -> Result<(f64, usize), EvalError> {
    let qs = question_set(variant, record, include_generic)?;
    let mut scores = Vec::with_capacity(qs.len());
    for g in qs {
        let input = PromptSpec::new(variant, record.context.clone(), g)?.render(cfg)?;
        scores.push(score_sequence(backend, &input, &record.answer)?.total);
    }
    let n = scores.len() as f64;
    Ok((log_sum_exp(&scores) - n.ln(), text::tokens(&record.answer).len()))
}

/// `ln P(answer | context, own guidance)` and the number of answer tokens.
pub fn guided_log_prob(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    record: &InstanceRecord,
    cfg: &DecodeConfig,
) -> Result<(f64, usize), EvalError> {
    let input = PromptSpec::for_instance(variant, record)?.render(cfg)?;
    let s = score_sequence(backend, &input, &record.answer)?;
    Ok((s.total, text::tokens(&record.answer).len()))
}

/// Corpus-level per-token perplexity, `exp(-sum ln P / sum tokens)`.
pub fn perplexity(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    records: &[InstanceRecord],
    mode: PerplexityMode,
    cfg: &DecodeConfig,
    include_generic: bool,
) -> Result<PerplexityReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput("instances"));
    }
    let mut log_prob = 0.0;
    let mut tokens = 0usize;
    for r in records {
        let (lp, n) = match mode {
            PerplexityMode::Guided => guided_log_prob(backend, variant, r, cfg)?,
            PerplexityMode::Marginalized => marginal_log_prob(backend, variant, r, cfg, include_generic)?,
        };
        log_prob += lp;
        tokens += n;
    }
    let per_token_ppl = if tokens == 0 { 1.0 } else { (-log_prob / tokens as f64).exp() };
    Ok(PerplexityReport {
        mode,
        per_token_ppl,
        cloze_accuracy: None,
        instances: records.len(),
        tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{BackendError, Capabilities, TokenScores};
    use crate::types::QuestionRecord;

    /// Assigns a fixed sequence probability per guidance string.
    struct TableScorer(Vec<(&'static str, f64)>);

    impl GeneratorBackend for TableScorer {
        fn capabilities(&self) -> Capabilities {
            Capabilities::ALL
        }
        fn description(&self) -> String {
            "table".into()
        }
        fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
            let p = self
                .0
                .iter()
                .find(|(g, _)| input.ends_with(g))
                .map(|(_, p)| *p)
                .unwrap_or(1e-6);
            let n = text::tokens(output).len();
            Ok(TokenScores::from_tokens(vec![p.ln() / n as f64; n]))
        }
    }

    fn rec(entities: &[&str]) -> InstanceRecord {
        InstanceRecord {
            document_id: "d".into(),
            context: vec!["the thief stole a rifle".into()],
            question: QuestionRecord {
                kind: QuestionKind::Agent,
                entity: Some("the thief".into()),
                surface: "what else did the thief do?".into(),
            },
            answer: "he fled".into(),
            context_entities: entities.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn uniform_mean_of_two() {
        let b = TableScorer(vec![("the thief", 0.2), ("none", 0.4)]);
        let (lp, n) = marginal_log_prob(&b, Variant::Egelm, &rec(&["the thief"]), &DecodeConfig::default(), true).unwrap();
        assert_eq!(n, 2);
        assert!((lp.exp() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_question_equals_guided() {
        let b = TableScorer(vec![("the thief", 0.2)]);
        let r = rec(&["the thief"]);
        let cfg = DecodeConfig::default();
        let m = perplexity(&b, Variant::Egelm, std::slice::from_ref(&r), PerplexityMode::Marginalized, &cfg, false).unwrap();
        let g = perplexity(&b, Variant::Egelm, &[r], PerplexityMode::Guided, &cfg, false).unwrap();
        assert_eq!(m.per_token_ppl, g.per_token_ppl);
        assert!((g.per_token_ppl - 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn empty_question_set() {
        let b = TableScorer(vec![]);
        let err = marginal_log_prob(&b, Variant::Qgelm, &rec(&[]), &DecodeConfig::default(), false);
        assert!(matches!(err, Err(EvalError::EmptyQuestionSet(_))));
        assert_eq!(question_set(Variant::Qgelm, &rec(&["a", "b"]), true).unwrap().len(), 5);
    }

    #[test]
    fn order_of_question_set_does_not_matter() {
        let b = TableScorer(vec![("do?", 0.1), ("to x?", 0.25), ("to y?", 0.05), ("happened?", 0.6)]);
        let cfg = DecodeConfig::default();
        let a = marginal_log_prob(&b, Variant::Qgelm, &rec(&["x", "y"]), &cfg, true).unwrap().0;
        let c = marginal_log_prob(&b, Variant::Qgelm, &rec(&["y", "x"]), &cfg, true).unwrap().0;
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn perplexity_at_least_one() {
        let b = TableScorer(vec![("do?", 0.9)]);
        let r = perplexity(&b, Variant::Qgelm, &[rec(&["the thief"])], PerplexityMode::Guided, &DecodeConfig::default(), true).unwrap();
        assert!(r.per_token_ppl >= 1.0);
    }
}
