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

//! Lightweight coreference and role tagging used by the metrics.

use crate::text;
use crate::types::Role;

/// Finds mentions in generated text that refer to an entity.
pub trait CorefProvider: Send + Sync {
    /// Mentions inside `generated` coreferent with `entity`, the entity's own
    /// surface form included. `history` is the text that preceded
    /// `generated` (context events, earlier generations).
    fn coreferent_mentions(&self, history: &[String], generated: &str, entity: &str) -> Vec<String>;
}

/// Tags the role a mention plays in an event text.
pub trait RoleTagger: Send + Sync {
    fn role_of(&self, event_text: &str, mention: &str) -> Option<Role>;
}

const SINGULAR: &[&str] = &["he", "him", "his", "she", "her", "it", "its"];
const PLURAL: &[&str] = &["they", "them", "their"];
const SUBJECT_FORMS: &[&str] = &["he", "she", "they", "it", "i", "we", "you"];
const OBJECT_FORMS: &[&str] = &["him", "her", "them", "me", "us"];
const COLLECTIVE: &[&str] = &["police", "people", "authorities", "officials", "troops", "forces", "crowd"];

fn looks_plural(entity: &str) -> bool {
    let toks = text::tokens(entity);
    match toks.last() {
        Some(head) if PLURAL.contains(&head.as_str()) => true,
        Some(head) if SINGULAR.contains(&head.as_str()) => false,
        Some(head) => COLLECTIVE.contains(&head.as_str()) || (head.ends_with('s') && !head.ends_with("ss")),
        None => false,
    }
}

/// Exact mention matching plus a pronoun dictionary: a pronoun whose number
/// agrees with the entity links to it once the entity has appeared in the
/// history or the generated text.
#[derive(Debug, Clone, Copy, Default)]
pub struct PronounCoref;

impl CorefProvider for PronounCoref {
    fn coreferent_mentions(&self, history: &[String], generated: &str, entity: &str) -> Vec<String> {
        let entity_norm = text::normalize(entity);
        if entity_norm.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let present = text::contains_phrase(generated, &entity_norm);
        if present {
            out.push(entity_norm.clone());
        }
        let seen = present || history.iter().any(|h| text::contains_phrase(h, &entity_norm));
        if seen {
            let pronouns = if looks_plural(&entity_norm) { PLURAL } else { SINGULAR };
            for tok in text::tokens(generated) {
                if pronouns.contains(&tok.as_str()) && tok != entity_norm && !out.contains(&tok) {
                    out.push(tok);
                }
            }
        }
        out
    }
}

/// Coreference from explicit mention clusters.
#[derive(Debug, Clone, Default)]
pub struct ClusterCoref {
    clusters: Vec<Vec<String>>,
}

impl ClusterCoref {
    pub fn new<I, C, S>(clusters: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        ClusterCoref {
            clusters: clusters
                .into_iter()
                .map(|c| c.into_iter().map(|m| text::normalize(m.as_ref())).collect())
                .collect(),
        }
    }
}

impl CorefProvider for ClusterCoref {
    fn coreferent_mentions(&self, _history: &[String], generated: &str, entity: &str) -> Vec<String> {
        let entity_norm = text::normalize(entity);
        let mut candidates = vec![entity_norm.clone()];
        for c in &self.clusters {
            if c.contains(&entity_norm) {
                candidates.extend(c.iter().cloned());
            }
        }
        let mut out: Vec<String> = Vec::new();
        for m in candidates {
            if !m.is_empty() && text::contains_phrase(generated, &m) && !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}

/// Role from position in a "subject predicate object" event text: a mention
/// opening the event is its subject (agent), any later mention is a theme.
/// Case-marked pronouns override position.
#[derive(Debug, Clone, Copy, Default)]
pub struct PositionalRoleTagger;

impl RoleTagger for PositionalRoleTagger {
    fn role_of(&self, event_text: &str, mention: &str) -> Option<Role> {
        let toks = text::tokens(event_text);
        let m = text::tokens(mention);
        let at = text::find_phrase(&toks, &m)?;
        if m.len() == 1 {
            if OBJECT_FORMS.contains(&m[0].as_str()) {
                return Some(Role::Theme);
            }
            if SUBJECT_FORMS.contains(&m[0].as_str()) && at == 0 {
                return Some(Role::Agent);
            }
        }
        Some(if at == 0 { Role::Agent } else { Role::Theme })
    }
}

/// True when `generated` mentions `entity` or something coreferent with it.
pub fn entity_presence(generated: &str, history: &[String], entity: &str, coref: &dyn CorefProvider) -> bool {
    !coref.coreferent_mentions(history, generated, entity).is_empty()
}
