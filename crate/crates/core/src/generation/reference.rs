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

//! Deterministic n-gram reference backend.
//!
//! The model predicts output tokens from a reduced context signature: the
//! last context event plus the guidance. Unseen signatures back off to the
//! guidance kind alone (question kind for QGELM, entity/none for EGELM).
//! Within a signature, the longest n-gram history with observations is
//! used, and every estimate is add-alpha smoothed toward a global unigram
//! so that all log-probabilities stay finite.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, Capabilities, GeneratorBackend, ScoredText, TokenScores};
use super::prompt::{split_prompt, PromptSpec, NO_ENTITY};
use super::{DecodeConfig, GenerationError, Variant};
use crate::text;
use crate::types::{parse_question_surface, InstanceRecord, QuestionKind};

pub const DEFAULT_ALPHA: f64 = 0.01;

const BOS: u32 = 0;
const EOS: u32 = 1;
const UNK: u32 = 2;

/// One supervised example: a formatted prompt and its target event text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: String,
    pub target: String,
}

/// Supervised pairs for a variant.
///
/// QGELM and EGELM pairs come straight from the instances. ELM pairs are
/// true next-event pairs: each document's event sequence is recovered from
/// its longest context, and generic-question answers supply the event that
/// follows it.
pub fn training_pairs(
    records: &[InstanceRecord],
    variant: Variant,
    cfg: &DecodeConfig,
) -> Result<Vec<TrainingPair>, GenerationError> {
    match variant {
        Variant::Egelm | Variant::Qgelm => records
            .iter()
            .map(|r| {
                Ok(TrainingPair {
                    input: PromptSpec::for_instance(variant, r)?.render(cfg)?,
                    target: text::normalize(&r.answer),
                })
            })
            .collect(),
        Variant::Elm => {
            let mut order: Vec<&str> = Vec::new();
            let mut docs: HashMap<&str, (Vec<String>, BTreeMap<usize, String>)> = HashMap::new();
            for r in records {
                let entry = docs.entry(r.document_id.as_str()).or_insert_with(|| {
                    order.push(r.document_id.as_str());
                    (Vec::new(), BTreeMap::new())
                });
                if r.context.len() > entry.0.len() {
                    entry.0 = r.context.clone();
                }
                if r.question.kind == QuestionKind::Generic && !r.context.is_empty() {
                    entry.1.insert(r.context.len() - 1, r.answer.clone());
                }
            }
            let mut pairs = Vec::new();
            for id in order {
                let (events, mut next) = docs.remove(id).expect("document seen");
                for t in 0..events.len().saturating_sub(1) {
                    next.insert(t, events[t + 1].clone());
                }
                for (t, target) in next {
                    if t >= events.len() {
                        continue;
                    }
                    let spec = PromptSpec::new(Variant::Elm, events[..=t].to_vec(), None)?;
                    pairs.push(TrainingPair {
                        input: spec.render(cfg)?,
                        target: text::normalize(&target),
                    });
                }
            }
            Ok(pairs)
        }
    }
}

pub fn write_training_pairs<W: Write>(mut writer: W, pairs: &[TrainingPair]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(writer, "{}", serde_json::to_string(p).map_err(std::io::Error::other)?)?;
    }
    Ok(())
}

pub fn read_training_pairs<R: BufRead>(reader: R) -> std::io::Result<Vec<TrainingPair>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
        }
    }
    Ok(out)
}

pub fn fit_reference_backend(
    records: &[InstanceRecord],
    variant: Variant,
    order: usize,
) -> Result<ReferenceBackend, GenerationError> {
    if records.is_empty() {
        return Err(GenerationError::EmptyTrainingSet);
    }
    let pairs = training_pairs(records, variant, &DecodeConfig::default())?;
    ReferenceBackend::from_pairs(variant, order, DEFAULT_ALPHA, pairs)
}

#[derive(Debug, Default)]
struct NextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Counts for one signature, indexed by n-gram order minus one.
#[derive(Debug)]
struct SignatureModel {
    levels: Vec<HashMap<Vec<u32>, NextCounts>>,
}

#[derive(Serialize, Deserialize)]
struct StoredBackend {
    variant: Variant,
    order: usize,
    alpha: f64,
    pairs: Vec<TrainingPair>,
}

#[derive(Debug)]
pub struct ReferenceBackend {
    variant: Variant,
    order: usize,
    alpha: f64,
    pairs: Vec<TrainingPair>,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    base: Vec<f64>,
    signatures: HashMap<String, SignatureModel>,
}

impl ReferenceBackend {
    pub fn from_pairs(
        variant: Variant,
        order: usize,
        alpha: f64,
        pairs: Vec<TrainingPair>,
    ) -> Result<Self, GenerationError> {
        if pairs.is_empty() {
            return Err(GenerationError::EmptyTrainingSet);
        }
        if order == 0 {
            return Err(GenerationError::InvalidConfig("n-gram order must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(GenerationError::InvalidConfig("alpha must be positive".into()));
        }
        let mut backend = ReferenceBackend {
            variant,
            order,
            alpha,
            pairs: Vec::new(),
            vocab: vec!["<s>".into(), "</s>".into(), "<unk>".into()],
            index: HashMap::new(),
            base: Vec::new(),
            signatures: HashMap::new(),
        };
        for (i, tok) in backend.vocab.iter().enumerate() {
            backend.index.insert(tok.clone(), i as u32);
        }
        let mut unigram: Vec<u64> = vec![0; 3];
        for pair in &pairs {
            let ids: Vec<u32> = text::tokens(&pair.target)
                .into_iter()
                .map(|t| backend.intern(t))
                .collect();
            unigram.resize(backend.vocab.len(), 0);
            for &id in ids.iter().chain(std::iter::once(&EOS)) {
                unigram[id as usize] += 1;
            }
            let (full, kind) = backend.signature(&pair.input);
            for key in [full, kind] {
                let order = backend.order;
                let model = backend
                    .signatures
                    .entry(key)
                    .or_insert_with(|| SignatureModel {
                        levels: (0..order).map(|_| HashMap::new()).collect(),
                    });
                add_sequence(model, order, &ids);
            }
        }
        unigram.resize(backend.vocab.len(), 0);
        let predicted = (backend.vocab.len() - 1) as f64;
        let n: u64 = unigram.iter().sum();
        backend.base = unigram
            .iter()
            .enumerate()
            .map(|(id, &c)| {
                if id as u32 == BOS {
                    0.0
                } else {
                    (c as f64 + alpha) / (n as f64 + alpha * predicted)
                }
            })
            .collect();
        backend.pairs = pairs;
        Ok(backend)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn pairs(&self) -> &[TrainingPair] {
        &self.pairs
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GenerationError> {
        let mut w = BufWriter::new(File::create(path)?);
        let stored = StoredBackend {
            variant: self.variant,
            order: self.order,
            alpha: self.alpha,
            pairs: self.pairs.clone(),
        };
        serde_json::to_writer(&mut w, &stored)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenerationError> {
        let stored: StoredBackend = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::from_pairs(stored.variant, stored.order, stored.alpha, stored.pairs)
    }

    fn intern(&mut self, token: String) -> u32 {
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = self.vocab.len() as u32;
        self.index.insert(token.clone(), id);
        self.vocab.push(token);
        id
    }

    fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    /// Full signature (last event + guidance) and its backoff (guidance kind).
    fn signature(&self, input: &str) -> (String, String) {
        let (events, guidance) = split_prompt(input, self.variant.is_guided());
        let last = text::normalize(events.last().copied().unwrap_or(""));
        let guidance = guidance.map(text::normalize).unwrap_or_default();
        let kind = match self.variant {
            Variant::Elm => "*".to_string(),
            Variant::Egelm if guidance == NO_ENTITY => "entity:none".to_string(),
            Variant::Egelm => "entity:some".to_string(),
            Variant::Qgelm => match parse_question_surface(&guidance) {
                Some((k, _)) => format!("question:{}", k.as_str()),
                None => "question:?".to_string(),
            },
        };
        (format!("{last}\u{1f}{guidance}"), kind)
    }

    fn counts_for(&self, keys: &(String, String), history: &[u32]) -> Option<&NextCounts> {
        for key in [&keys.0, &keys.1] {
            let Some(model) = self.signatures.get(key) else {
                continue;
            };
            for o in (1..=self.order).rev() {
                let h = history_slice(history, o - 1);
                if let Some(nc) = model.levels[o - 1].get(h) {
                    if nc.total > 0 {
                        return Some(nc);
                    }
                }
            }
        }
        None
    }

    fn prob(&self, counts: Option<&NextCounts>, token: u32) -> f64 {
        let base = self.base[token as usize];
        match counts {
            Some(nc) => {
                let c = nc.next.get(&token).copied().unwrap_or(0) as f64;
                (c + self.alpha * base) / (nc.total as f64 + self.alpha)
            }
            None => base,
        }
    }

    /// Next-token distribution over predicted ids, `<unk>` excluded and the
    /// rest renormalized. End of sequence is excluded at the first position,
    /// so no output is empty.
    fn distribution(&self, keys: &(String, String), history: &[u32]) -> Vec<(u32, f64)> {
        let counts = self.counts_for(keys, history);
        let mut dist: Vec<(u32, f64)> = (1..self.vocab.len() as u32)
            .filter(|&id| id != UNK && !(id == EOS && history.is_empty()))
            .map(|id| (id, self.prob(counts, id)))
            .collect();
        let z: f64 = dist.iter().map(|(_, p)| p).sum();
        for (_, p) in &mut dist {
            *p /= z;
        }
        dist
    }

    fn render(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id != EOS)
            .map(|&id| self.vocab[id as usize].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn sample_one(&self, keys: &(String, String), cfg: &DecodeConfig, rng: &mut ChaCha8Rng) -> String {
        let mut history: Vec<u32> = Vec::new();
        for _ in 0..cfg.max_output_tokens {
            let mut dist = self.distribution(keys, &history);
            dist.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut kept = 0;
            let mut mass = 0.0;
            for (_, p) in &dist {
                kept += 1;
                mass += p;
                if mass >= cfg.top_p {
                    break;
                }
            }
            let r = rng.gen::<f64>() * mass;
            let mut acc = 0.0;
            let mut choice = dist[kept - 1].0;
            for (id, p) in &dist[..kept] {
                acc += p;
                if r < acc {
                    choice = *id;
                    break;
                }
            }
            if choice == EOS {
                break;
            }
            history.push(choice);
        }
        self.render(&history)
    }
}

fn history_slice(history: &[u32], len: usize) -> &[u32] {
    // BOS padding is implicit: shorter histories are looked up as-is and were
    // stored the same way during counting.
    &history[history.len().saturating_sub(len)..]
}

fn add_sequence(model: &mut SignatureModel, order: usize, ids: &[u32]) {
    let mut history: Vec<u32> = Vec::with_capacity(ids.len());
    for &tok in ids.iter().chain(std::iter::once(&EOS)) {
        for o in 1..=order {
            let h = history_slice(&history, o - 1).to_vec();
            let nc = model.levels[o - 1].entry(h).or_default();
            nc.total += 1;
            *nc.next.entry(tok).or_insert(0) += 1;
        }
        history.push(tok);
    }
}

impl GeneratorBackend for ReferenceBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn description(&self) -> String {
        format!(
            "reference {}-gram backend ({}, {} training pairs, alpha {})",
            self.order,
            self.variant,
            self.pairs.len(),
            self.alpha
        )
    }

    fn score(&self, input: &str, output: &str) -> Result<TokenScores, BackendError> {
        let keys = self.signature(input);
        let mut history = Vec::new();
        let mut per_token = Vec::new();
        for tok in text::tokens(output) {
            let id = self.lookup(&tok);
            let counts = self.counts_for(&keys, &history);
            per_token.push(self.prob(counts, id).ln());
            history.push(id);
        }
        Ok(TokenScores::from_tokens(per_token))
    }

    fn sample(&self, input: &str, n: usize, cfg: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        let keys = self.signature(input);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.random_seed);
        Ok((0..n).map(|_| self.sample_one(&keys, cfg, &mut rng)).collect())
    }

    fn beam(&self, input: &str, cfg: &DecodeConfig) -> Result<Vec<ScoredText>, BackendError> {
        let keys = self.signature(input);
        let width = cfg.beam_size.max(1);
        let mut active: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), 0.0)];
        let mut finished: Vec<(Vec<u32>, f64)> = Vec::new();
        for _ in 0..cfg.max_output_tokens {
            let mut pool: Vec<(Vec<u32>, f64)> = Vec::new();
            for (hyp, lp) in &active {
                let mut dist = self.distribution(&keys, hyp);
                dist.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                for (id, p) in dist.into_iter().take(width) {
                    let mut next = hyp.clone();
                    next.push(id);
                    pool.push((next, lp + p.ln()));
                }
            }
            pool.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            pool.truncate(width);
            active.clear();
            for (hyp, lp) in pool {
                if hyp.last() == Some(&EOS) {
                    finished.push((hyp, lp));
                } else {
                    active.push((hyp, lp));
                }
            }
            if active.is_empty() {
                break;
            }
            if finished.len() >= width {
                // scores only decrease, so stop once no live hypothesis can
                // still enter the top `width`
                finished.sort_by(|a, b| b.1.total_cmp(&a.1));
                let best_active = active.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
                if best_active <= finished[width - 1].1 {
                    break;
                }
            }
        }
        if finished.len() < width {
            finished.extend(active);
        }
        finished.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut out: Vec<ScoredText> = Vec::new();
        for (hyp, lp) in finished {
            let text = self.render(&hyp);
            if !out.iter().any(|o| o.text == text) {
                out.push(ScoredText { text, score: lp });
            }
            if out.len() == width {
                break;
            }
        }
        Ok(out)
    }
}
