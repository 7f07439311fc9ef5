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

//! Narrative cloze: pick the gold answer among confounders drawn from
//! other documents.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::generation::{score_sequence, DecodeConfig, GeneratorBackend, PromptSpec, Variant};
use crate::types::InstanceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClozeReport {
    pub accuracy: f64,
    pub documents: usize,
    pub confounders: usize,
}

/// Groups records by document, keeping first-appearance order.
pub fn group_by_document(records: &[InstanceRecord]) -> Vec<Vec<&InstanceRecord>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<&InstanceRecord>> = Vec::new();
    for r in records {
        let slot = *index.entry(r.document_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(r);
    }
    groups
}

/// Accuracy (percent) of ranking the gold answer strictly above every
/// confounder. One instance is drawn per document and each confounder comes
/// from a different other document; ties count as misses.
pub fn narrative_cloze(
    backend: &dyn GeneratorBackend,
    variant: Variant,
    records: &[InstanceRecord],
    confounders: usize,
    seed: u64,
    cfg: &DecodeConfig,
) -> Result<ClozeReport, EvalError> {
    let groups = group_by_document(records);
    if groups.len() < 2 {
        return Err(EvalError::TooFewDocuments);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for (d, group) in groups.iter().enumerate() {
        let inst = group[rng.gen_range(0..group.len())];
        let input = PromptSpec::for_instance(variant, inst)?.render(cfg)?;
        let gold = score_sequence(backend, &input, &inst.answer)?.total;
        let mut best_other = f64::NEG_INFINITY;
        let drawn = confounders.min(groups.len() - 1);
        for mut other in rand::seq::index::sample(&mut rng, groups.len() - 1, drawn) {
            if other >= d {
                other += 1;
            }
            let pool = &groups[other];
            let confounder = pool[rng.gen_range(0..pool.len())];
            let s = score_sequence(backend, &input, &confounder.answer)?.total;
            best_other = best_other.max(s);
        }
        if gold > best_other {
            correct += 1;
        }
    }
    Ok(ClozeReport {
        accuracy: 100.0 * correct as f64 / groups.len() as f64,
        documents: groups.len(),
        confounders,
    })
}
