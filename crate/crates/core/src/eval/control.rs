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

//! Entity controllability: how often a model fails to mention a requested
//! entity (optionally in a requested role) within a fixed budget of beam
//! candidates or samples.

use serde::{Deserialize, Serialize};

use super::coref::{CorefProvider, RoleTagger};
use super::EvalError;
use crate::generation::{beam_events, derive_seed, sample_events, DecodeConfig, GeneratorBackend, PromptSpec, Variant};
use crate::types::{question_surface, QuestionKind, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecodeMode {
    Beam,
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PresenceCriterion {
    AnyPresence,
    RoleSpecific,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlProbe {
    pub context: Vec<String>,
    pub entity: String,
    pub role: Option<Role>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub mode: DecodeMode,
    pub criterion: PresenceCriterion,
    pub budget: usize,
    pub probes: usize,
    pub fail_pct: f64,
    /// Mean 1-based index of the first successful sample, over probes that
    /// succeeded. Only defined for sampling.
    pub avg_samples: Option<f64>,
}

/// Prompt that asks for `probe` under `variant`. Role-less probes are asked
/// as agent questions by QGELM.
pub fn probe_prompt(variant: Variant, probe: &ControlProbe, cfg: &DecodeConfig) -> Result<String, EvalError> {
    let guidance = match variant {
        Variant::Elm => None,
        Variant::Egelm => Some(probe.entity.clone()),
        Variant::Qgelm => {
            let kind = QuestionKind::for_role(probe.role.unwrap_or(Role::Agent));
            Some(question_surface(kind, &probe.entity))
        }
    };
    Ok(PromptSpec::new(variant, probe.context.clone(), guidance)?.render(cfg)?)
}

fn passes(
    generated: &str,
    probe: &ControlProbe,
    criterion: PresenceCriterion,
    coref: &dyn CorefProvider,
    tagger: &dyn RoleTagger,
) -> bool {
    let mentions = coref.coreferent_mentions(&probe.context, generated, &probe.entity);
    match (criterion, probe.role) {
        (PresenceCriterion::RoleSpecific, Some(role)) => {
            mentions.iter().any(|m| tagger.role_of(generated, m) == Some(role))
        }
        _ => !mentions.is_empty(),
    }
}

/// Evaluates every probe with up to `budget` candidates.
///
/// Sampling draws candidate `i` of probe `p` with a seed derived from
/// `(cfg.random_seed, p, i)`, so a larger budget only appends candidates
/// and the failure rate can only go down. Beam mode runs a beam of width
/// `max(budget, cfg.beam_size)` and inspects its first `budget` entries.
#[allow(clippy::too_many_arguments)]
pub fn controllability_eval(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    probes: &[ControlProbe],
    mode: DecodeMode,
    criterion: PresenceCriterion,
    budget: usize,
    cfg: &DecodeConfig,
    coref: &dyn CorefProvider,
    tagger: &dyn RoleTagger,
) -> Result<ControlReport, EvalError> {
    if probes.is_empty() {
        return Err(EvalError::EmptyInput("probes"));
    }
    let mut failures = 0usize;
    let mut first_hits: Vec<usize> = Vec::new();
    for (p, probe) in probes.iter().enumerate() {
        let input = probe_prompt(variant, probe, cfg)?;
        let hit = match mode {
            DecodeMode::Sampling => {
                let mut hit = None;
                for i in 0..budget {
                    let seeded = cfg.with_seed(derive_seed(cfg.random_seed, &[p as u64, i as u64]));
                    let out = sample_events(backend, &input, 1, &seeded)?;
                    if passes(&out[0], probe, criterion, coref, tagger) {
                        hit = Some(i + 1);
                        break;
                    }
                }
                hit
            }
            DecodeMode::Beam => {
                let wide = DecodeConfig {
                    beam_size: budget.max(cfg.beam_size).max(1),
                    ..cfg.clone()
                };
                let beam = beam_events(backend, &input, &wide)?;
                beam.iter()
                    .take(budget)
                    .position(|c| passes(&c.text, probe, criterion, coref, tagger))
                    .map(|i| i + 1)
            }
        };
        match hit {
            Some(i) => first_hits.push(i),
            None => failures += 1,
        }
    }
    let avg_samples = match mode {
        DecodeMode::Sampling if !first_hits.is_empty() => {
            Some(first_hits.iter().sum::<usize>() as f64 / first_hits.len() as f64)
        }
        _ => None,
    };
    Ok(ControlReport {
        mode,
        criterion,
        budget,
        probes: probes.len(),
        fail_pct: 100.0 * failures as f64 / probes.len() as f64,
        avg_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::coref::{PositionalRoleTagger, PronounCoref};
    use crate::generation::scripted::{ConstantBackend, EchoBackend};

    fn probes() -> Vec<ControlProbe> {
        vec![
            ControlProbe {
                context: vec!["the mayor opened the bridge".into()],
                entity: "the mayor".into(),
                role: Some(Role::Agent),
            },
            ControlProbe {
                context: vec!["a storm hit the coast".into()],
                entity: "the coast".into(),
                role: None,
            },
        ]
    }

    fn run(b: &dyn GeneratorBackend, mode: DecodeMode, budget: usize) -> ControlReport {
        controllability_eval(
            b,
            Variant::Qgelm,
            &probes(),
            mode,
            PresenceCriterion::AnyPresence,
            budget,
            &DecodeConfig::default(),
            &PronounCoref,
            &PositionalRoleTagger,
        )
        .unwrap()
    }

    #[test]
    fn echo_never_fails() {
        let r = run(&EchoBackend, DecodeMode::Sampling, 40);
        assert_eq!(r.fail_pct, 0.0);
        assert_eq!(r.avg_samples, Some(1.0));
        let r = run(&EchoBackend, DecodeMode::Beam, 40);
        assert_eq!(r.fail_pct, 0.0);
        assert_eq!(r.avg_samples, None);
    }

    #[test]
    fn suppressor_always_fails() {
        let r = run(&ConstantBackend::suppressor(), DecodeMode::Sampling, 40);
        assert_eq!(r.fail_pct, 100.0);
        assert_eq!(r.avg_samples, None);
    }

    #[test]
    fn zero_budget_fails_everything() {
        assert_eq!(run(&EchoBackend, DecodeMode::Sampling, 0).fail_pct, 100.0);
    }

    #[test]
    fn empty_probe_list() {
        let err = controllability_eval(
            &EchoBackend,
            Variant::Qgelm,
            &[],
            DecodeMode::Beam,
            PresenceCriterion::AnyPresence,
            40,
            &DecodeConfig::default(),
            &PronounCoref,
            &PositionalRoleTagger,
        );
        assert!(matches!(err, Err(EvalError::EmptyInput(_))));
    }

    #[test]
    fn role_specific_uses_tagger() {
        // echo emits "<entity> acted": entity in subject position -> agent
        let mut ps = probes();
        ps[1].role = Some(Role::Theme);
        let r = controllability_eval(
            &EchoBackend,
            Variant::Qgelm,
            &ps,
            DecodeMode::Sampling,
            PresenceCriterion::RoleSpecific,
            5,
            &DecodeConfig::default(),
            &PronounCoref,
            &PositionalRoleTagger,
        )
        .unwrap();
        assert_eq!(r.fail_pct, 50.0);
    }
}
