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

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use evqa::eval::overlap::{read_jsonl, SynonymRecord};
use evqa::eval::{
    controllability_eval, diversity_protocol, narrative_cloze, perplexity, schema_overlap, ControlProbe, DecodeMode,
    DiversityConfig, GoldSchema, PerplexityMode, PositionalRoleTagger, PresenceCriterion, PronounCoref, SynonymMap,
};
use evqa::generation::reference::{write_training_pairs, DEFAULT_ALPHA};
use evqa::generation::{
    beam_events, ipc, sample_events, training_pairs, DecodeConfig, PromptSpec, ReferenceBackend, Variant, NO_ENTITY,
};
use evqa::ingest::{extract_event_sequence, load_corpus, write_corpus, Strictness};
use evqa::pipeline::{build_instances, corpus_stats, read_instances, write_instances, AnswerScope, PipelineConfig};
use evqa::session::SessionConfig;
use evqa::types::{parse_question_surface, question_surface, QuestionKind};
use evqa::InstanceRecord;
use evqa_service::{run_tty, serve, ServiceConfig, SessionStore, SystemClock};

use crate::backend::open_backend;
use crate::{Command, ControlMode, Criterion, EvalArgs, GenMode, PplMode};

/// A flag combination that is rejected before any work starts.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn load_instances(path: &Path) -> Result<Vec<InstanceRecord>> {
    read_instances(open(path)?).with_context(|| format!("reading instances from {}", path.display()))
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    backend: String,
    variant: Variant,
    seed: u64,
    instances: &'a str,
    result: T,
}

fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn strictness(strict: bool) -> Strictness {
    if strict {
        Strictness::Strict
    } else {
        Strictness::Lenient
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { corpus, strict, out } => {
            let loaded = load_corpus(&corpus, strictness(strict)).with_context(|| format!("loading {}", corpus.display()))?;
            let events: usize = loaded.documents.iter().map(|d| extract_event_sequence(d).len()).sum();
            eprintln!(
                "{} documents, {} events, {} records skipped",
                loaded.documents.len(),
                events,
                loaded.issues.len()
            );
            for issue in &loaded.issues {
                eprintln!("  line {}: {}", issue.line, issue.message);
            }
            if let Some(out) = out {
                let mut w = create(&out)?;
                write_corpus(&mut w, &loaded.documents)?;
                w.flush()?;
            }
            Ok(())
        }
        Command::BuildTuples {
            corpus,
            out,
            all_matches,
            no_fallback,
            min_context,
            strict,
        } => {
            if min_context == 0 {
                return Err(usage("--min-context must be at least 1"));
            }
            let cfg = PipelineConfig {
                min_context_len: min_context,
                answer_scope: if all_matches { AnswerScope::AllMatches } else { AnswerScope::FirstMatch },
                emit_fallback: !no_fallback,
            };
            let loaded = load_corpus(&corpus, strictness(strict)).with_context(|| format!("loading {}", corpus.display()))?;
            let instances: Vec<_> = loaded.documents.iter().flat_map(|d| build_instances(d, &cfg)).collect();
            let records: Vec<InstanceRecord> = instances.iter().map(InstanceRecord::from).collect();
            let mut w = create(&out)?;
            write_instances(&mut w, &records)?;
            w.flush()?;
            let stats = corpus_stats(instances.iter().map(|i| i.question.kind()));
            eprintln!(
                "{} instances from {} documents (generic {}, agent {}, theme {})",
                stats.total,
                loaded.documents.len(),
                stats.q1,
                stats.q2,
                stats.q3
            );
            Ok(())
        }
        Command::Train {
            instances,
            variant,
            out,
            order,
            export,
            decode,
        } => {
            if order == 0 {
                return Err(usage("--order must be at least 1"));
            }
            let cfg = decode.config(0)?;
            let records = load_instances(&instances)?;
            let pairs = training_pairs(&records, variant, &cfg)?;
            if let Some(path) = export {
                let mut w = create(&path)?;
                write_training_pairs(&mut w, &pairs)?;
                w.flush()?;
            }
            let n = pairs.len();
            let model = ReferenceBackend::from_pairs(variant, order, DEFAULT_ALPHA, pairs)?;
            model.save(&out).with_context(|| format!("saving {}", out.display()))?;
            eprintln!("trained {variant} {order}-gram model on {n} pairs");
            Ok(())
        }
        Command::Generate {
            backend,
            variant,
            context,
            entity,
            question,
            mode,
            n,
            seed,
            out,
            decode,
        } => {
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            let guidance = guidance_for(variant, entity, question)?;
            let cfg = decode.config(seed)?;
            let events: Vec<String> = open(&context)?
                .lines()
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .filter(|l| !l.trim().is_empty())
                .collect();
            let backend = open_backend(&backend, Some(variant))?;
            let input = PromptSpec::new(variant, events, guidance)?.render(&cfg)?;
            let outputs: Vec<Generated> = match mode {
                GenMode::Sample => sample_events(&*backend, &input, n, &cfg)?
                    .into_iter()
                    .map(|text| Generated { text, score: None })
                    .collect(),
                GenMode::Beam => {
                    let wide = DecodeConfig {
                        beam_size: n.max(cfg.beam_size),
                        ..cfg
                    };
                    beam_events(&*backend, &input, &wide)?
                        .into_iter()
                        .take(n)
                        .map(|s| Generated {
                            text: s.text,
                            score: Some(s.score),
                        })
                        .collect()
                }
            };
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(create(p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            for g in &outputs {
                writeln!(w, "{}", serde_json::to_string(g)?)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::EvalDiversity {
            common,
            max_length,
            sequences,
            contexts,
        } => {
            if max_length == 0 || sequences < 2 || contexts == 0 {
                return Err(usage("--max-length and --contexts must be at least 1 and --sequences at least 2"));
            }
            let (backend, records, cfg) = prepare(&common)?;
            let mut seen = HashSet::new();
            let starts: Vec<String> = records
                .iter()
                .filter(|r| r.context.len() == 1 && seen.insert(r.context[0].clone()))
                .map(|r| r.context[0].clone())
                .take(contexts)
                .collect();
            let mut lexicon: Vec<String> = records.iter().flat_map(|r| r.context_entities.iter().cloned()).collect();
            lexicon.sort();
            lexicon.dedup();
            let dcfg = DiversityConfig {
                max_length,
                sequences_per_context: sequences,
                max_n: 3,
                seed: common.seed,
                decode: cfg,
                entity_lexicon: lexicon,
            };
            let rep = diversity_protocol(&*backend, common.variant, &starts, &dcfg)?;
            report(&common, &*backend, rep)
        }
        Command::EvalControl {
            common,
            mode,
            criterion,
            budget,
        } => {
            if budget == 0 {
                return Err(usage("--budget must be at least 1"));
            }
            let (backend, records, cfg) = prepare(&common)?;
            let mut seen = HashSet::new();
            let probes: Vec<ControlProbe> = records
                .iter()
                .filter(|r| r.question.kind != QuestionKind::Generic)
                .filter_map(|r| {
                    Some(ControlProbe {
                        context: r.context.clone(),
                        entity: r.question.entity.clone()?,
                        role: r.question.kind.role(),
                    })
                })
                .filter(|p| seen.insert((p.context.clone(), p.entity.clone(), p.role)))
                .collect();
            let mode = match mode {
                ControlMode::Sampling => DecodeMode::Sampling,
                ControlMode::Beam => DecodeMode::Beam,
            };
            let criterion = match criterion {
                Criterion::Any => PresenceCriterion::AnyPresence,
                Criterion::Role => PresenceCriterion::RoleSpecific,
            };
            let rep = controllability_eval(
                &*backend,
                common.variant,
                &probes,
                mode,
                criterion,
                budget,
                &cfg,
                &PronounCoref,
                &PositionalRoleTagger,
            )?;
            report(&common, &*backend, rep)
        }
        Command::EvalPpl { common, mode, no_generic } => {
            let (backend, records, cfg) = prepare(&common)?;
            let mode = match mode {
                PplMode::Guided => PerplexityMode::Guided,
                PplMode::Marginalized => PerplexityMode::Marginalized,
            };
            let rep = perplexity(&*backend, common.variant, &records, mode, &cfg, !no_generic)?;
            report(&common, &*backend, rep)
        }
        Command::EvalCloze { common, confounders } => {
            if confounders == 0 {
                return Err(usage("--confounders must be at least 1"));
            }
            let (backend, records, cfg) = prepare(&common)?;
            let rep = narrative_cloze(&*backend, common.variant, &records, confounders, common.seed, &cfg)?;
            report(&common, &*backend, rep)
        }
        Command::EvalOverlap {
            generated,
            gold,
            synonyms,
            out,
        } => {
            let generated: Vec<GeneratedSchema> = read_jsonl(open(&generated)?)?;
            let gold: Vec<GoldSchema> = read_jsonl(open(&gold)?)?;
            let synonyms = match synonyms {
                Some(p) => SynonymMap::from_records(&read_jsonl::<SynonymRecord, _>(open(&p)?)?),
                None => SynonymMap::default(),
            };
            let mut per_domain = BTreeMap::new();
            for schema in &gold {
                let events: Vec<String> = generated
                    .iter()
                    .filter(|g| g.domain == schema.domain)
                    .flat_map(|g| g.events.iter().cloned())
                    .collect();
                per_domain.insert(schema.domain.clone(), schema_overlap(&events, &schema.events, &synonyms)?);
            }
            if per_domain.is_empty() {
                anyhow::bail!("gold schema file is empty");
            }
            let mean = per_domain.values().sum::<f64>() / per_domain.len() as f64;
            write_report(&out, &OverlapReport { per_domain, mean })
        }
        Command::Serve {
            backend,
            bind,
            log_dir,
            time_budget,
            tty,
            variant,
            seed,
            tty_log,
            decode,
        } => {
            if time_budget == 0 {
                return Err(usage("--time-budget must be at least 1"));
            }
            let cfg = decode.config(seed)?;
            if tty {
                let backend = open_backend(&backend, Some(variant))?;
                let mut log = tty_log.as_deref().map(create).transpose()?;
                let config = SessionConfig {
                    time_budget_secs: time_budget,
                    rng_seed: seed,
                    decode: cfg,
                };
                let stdin = std::io::stdin();
                run_tty(
                    &*backend,
                    variant,
                    config,
                    &SystemClock,
                    stdin.lock(),
                    std::io::stdout(),
                    log.as_mut().map(|w| w as &mut dyn Write),
                )?;
                if let Some(mut w) = log {
                    w.flush()?;
                }
                return Ok(());
            }
            let backend = open_backend(&backend, None)?;
            if let Some(dir) = &log_dir {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let store = SessionStore::open(
                backend,
                ServiceConfig {
                    log_dir,
                    default_time_budget_secs: time_budget,
                    decode: cfg,
                },
                Arc::new(SystemClock),
            )?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime
                .block_on(serve(&bind, Arc::new(store)))
                .with_context(|| format!("serving on {bind}"))?;
            Ok(())
        }
        Command::BackendServe { backend } => {
            let backend = open_backend(&backend, None)?;
            ipc::serve(&*backend, std::io::stdin().lock(), std::io::stdout().lock())?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Generated {
    text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Deserialize)]
struct GeneratedSchema {
    domain: String,
    events: Vec<String>,
}

#[derive(Serialize)]
struct OverlapReport {
    per_domain: BTreeMap<String, f64>,
    mean: f64,
}

type Prepared = (Arc<dyn evqa::generation::GeneratorBackend>, Vec<InstanceRecord>, DecodeConfig);

fn prepare(common: &EvalArgs) -> Result<Prepared> {
    let cfg = common.decode.config(common.seed)?;
    let records = load_instances(&common.instances)?;
    let backend = open_backend(&common.backend, Some(common.variant))?;
    Ok((backend, records, cfg))
}

fn report<T: Serialize>(common: &EvalArgs, backend: &dyn evqa::generation::GeneratorBackend, result: T) -> Result<()> {
    let instances = common.instances.display().to_string();
    write_report(
        &common.out,
        &Report {
            backend: backend.description(),
            variant: common.variant,
            seed: common.seed,
            instances: &instances,
            result,
        },
    )
}

/// Guidance string for `variant` from the `--entity` / `--question` flags.
fn guidance_for(variant: Variant, entity: Option<String>, question: Option<String>) -> Result<Option<String>> {
    match variant {
        Variant::Elm => {
            if entity.is_some() || question.is_some() {
                return Err(usage("elm takes neither --entity nor --question"));
            }
            Ok(None)
        }
        Variant::Egelm => match (entity, question) {
            (Some(e), _) => Ok(Some(e)),
            (None, Some(q)) => match parse_question_surface(&q) {
                Some((_, e)) => Ok(Some(e.unwrap_or_else(|| NO_ENTITY.to_string()))),
                None => Err(usage(format!("cannot read an entity from question {q:?}"))),
            },
            (None, None) => Ok(Some(NO_ENTITY.to_string())),
        },
        Variant::Qgelm => match (entity, question) {
            (_, Some(q)) => Ok(Some(q)),
            (Some(e), None) => Ok(Some(question_surface(QuestionKind::Agent, &e))),
            (None, None) => Ok(Some(question_surface(QuestionKind::Generic, ""))),
        },
    }
}
