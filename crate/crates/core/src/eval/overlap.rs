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

//! Predicate-level overlap between generated events and flattened gold
//! schemas.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEvent {
    pub predicate: String,
    #[serde(default)]
    pub text: String,
}

/// One line of a gold schema file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSchema {
    pub domain: String,
    pub events: Vec<GoldEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymRecord {
    pub predicate: String,
    pub synonyms: Vec<String>,
}

/// Symmetric predicate links, stored by lemma.
#[derive(Debug, Clone, Default)]
pub struct SynonymMap {
    links: HashMap<String, HashSet<String>>,
}

impl SynonymMap {
    pub fn from_records(records: &[SynonymRecord]) -> Self {
        let mut map = SynonymMap::default();
        for r in records {
            let p = lemma(&r.predicate);
            for s in &r.synonyms {
                let s = lemma(s);
                map.links.entry(p.clone()).or_default().insert(s.clone());
                map.links.entry(s).or_default().insert(p.clone());
            }
        }
        map
    }

    pub fn linked(&self, a: &str, b: &str) -> bool {
        a == b || self.links.get(a).is_some_and(|s| s.contains(b))
    }
}

fn ends_double_consonant(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2] && !b"aeiouslz".contains(&b[b.len() - 1])
}

/// Crude suffix-stripping lemma, applied identically to both sides of every
/// comparison.
pub fn lemma(word: &str) -> String {
    let mut w = text::normalize(word);
    let n = w.len();
    if n >= 4 && (w.ends_with("ies") || w.ends_with("ied")) {
        w.truncate(n - 3);
        w.push('y');
    } else if n > 5 && w.ends_with("ing") {
        w.truncate(n - 3);
        if ends_double_consonant(&w) {
            w.pop();
        }
    } else if n > 4 && w.ends_with("ed") {
        w.truncate(n - 2);
        if ends_double_consonant(&w) {
            w.pop();
        }
    } else if n > 4 && ["ses", "xes", "zes", "ches", "shes"].iter().any(|s| w.ends_with(s)) {
        w.truncate(n - 2);
    } else if n > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w.truncate(n - 1);
    }
    if w.len() > 3 && w.ends_with('e') {
        w.pop();
    }
    w
}

/// Candidate predicate lemmas of a generated event. A `subject|predicate|object`
/// event contributes its predicate only; plain text contributes every token.
fn predicate_lemmas(event: &str) -> Vec<String> {
    if event.contains('|') {
        let pred = event.split('|').nth(1).unwrap_or("");
        text::tokens(pred).iter().map(|t| lemma(t)).collect()
    } else {
        text::tokens(event).iter().map(|t| lemma(t)).collect()
    }
}

/// Percentage of gold events matched by at least one generated event.
pub fn schema_overlap(generated: &[String], gold: &[GoldEvent], synonyms: &SynonymMap) -> Result<f64, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyInput("gold schema"));
    }
    let generated: Vec<Vec<String>> = generated.iter().map(|g| predicate_lemmas(g)).collect();
    let matched = gold
        .iter()
        .filter(|g| {
            let target = lemma(&g.predicate);
            generated
                .iter()
                .any(|lemmas| lemmas.iter().any(|l| synonyms.linked(&target, l)))
        })
        .count();
    Ok(100.0 * matched as f64 / gold.len() as f64)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R) -> std::io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?);
    }
    Ok(out)
}
