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

//! Domain model shared by every stage of the workbench.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("malformed event text {0:?}: need at least subject and predicate")]
    MalformedEvent(String),
    #[error("event predicate must not be empty")]
    EmptyPredicate,
}

/// One OpenIE tuple, linked to its position in the source document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub subject: String,
    pub predicate: String,
    #[serde(default)]
    pub object: String,
    pub sentence_index: usize,
    pub event_index: usize,
}

impl Event {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
        sentence_index: usize,
        event_index: usize,
    ) -> Result<Self, TypeError> {
        let predicate = predicate.into();
        if predicate.trim().is_empty() {
            return Err(TypeError::EmptyPredicate);
        }
        Ok(Event {
            subject: subject.into(),
            predicate,
            object: object.into(),
            sentence_index,
            event_index,
        })
    }

    /// Space-joined surface form, see [`serialize_event`].
    pub fn text(&self) -> String {
        serialize_event(self)
    }

    /// Lossless `subject|predicate|object` rendering accepted by
    /// [`parse_event_text`]. The object field is omitted when empty.
    pub fn delimited(&self) -> String {
        if self.object.trim().is_empty() {
            format!("{}|{}", self.subject.trim(), self.predicate.trim())
        } else {
            format!(
                "{}|{}|{}",
                self.subject.trim(),
                self.predicate.trim(),
                self.object.trim()
            )
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_event(self))
    }
}

/// Canonical "subject predicate object" rendering with single spaces; an empty
/// object is dropped.
pub fn serialize_event(event: &Event) -> String {
    [&event.subject, &event.predicate, &event.object]
        .iter()
        .flat_map(|field| field.split_whitespace())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses either the `|`-delimited form or plain whitespace text.
///
/// Whitespace text is split as first token = subject, second = predicate,
/// remainder = object, so it is only lossless for single-token arguments.
pub fn parse_event_text(
    text: &str,
    sentence_index: usize,
    event_index: usize,
) -> Result<Event, TypeError> {
    let (subject, predicate, object) = if text.contains('|') {
        let fields: Vec<&str> = text.split('|').map(str::trim).collect();
        if fields.len() < 2 || fields[1].is_empty() {
            return Err(TypeError::MalformedEvent(text.to_string()));
        }
        let object = fields[2..].iter().filter(|f| !f.is_empty()).copied().collect::<Vec<_>>().join(" ");
        (fields[0].to_string(), fields[1].to_string(), object)
    } else {
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.len() < 2 {
            return Err(TypeError::MalformedEvent(text.to_string()));
        }
        (words[0].to_string(), words[1].to_string(), words[2..].join(" "))
    };
    Event::new(subject, predicate, object, sentence_index, event_index)
}

/// The two broad semantic roles an entity can play in an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Agent,
    Theme,
}

/// Grammatical role of a noun phrase, already reduced by the upstream parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DepRole {
    Subject,
    Object,
    Other,
}

impl DepRole {
    /// Subjects are agents, objects are themes, everything else is unassigned.
    pub fn semantic_role(self) -> Option<Role> {
        match self {
            DepRole::Subject => Some(Role::Agent),
            DepRole::Object => Some(Role::Theme),
            DepRole::Other => None,
        }
    }
}

/// Half-open `[start, end)` token offsets inside one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        TokenSpan { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn fits(&self, len: usize) -> bool {
        !self.is_empty() && self.end <= len
    }
}

impl From<[usize; 2]> for TokenSpan {
    fn from(v: [usize; 2]) -> Self {
        TokenSpan::new(v[0], v[1])
    }
}

impl From<TokenSpan> for [usize; 2] {
    fn from(s: TokenSpan) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub String);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NounPhraseMention {
    pub text: String,
    pub sentence_index: usize,
    pub span: TokenSpan,
    /// `None` when the mention is neither subject nor object.
    pub role: Option<Role>,
    pub cluster_id: Option<ClusterId>,
}

impl NounPhraseMention {
    /// True when both mentions denote the same entity: shared cluster, or
    /// identical normalized text when neither is clustered.
    pub fn corefers_with(&self, other: &NounPhraseMention) -> bool {
        match (&self.cluster_id, &other.cluster_id) {
            (Some(a), Some(b)) => a == b,
            (None, None) => text::same_text(&self.text, &other.text),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorefCluster {
    pub cluster_id: ClusterId,
    pub mentions: Vec<NounPhraseMention>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionKind {
    #[serde(rename = "AGENT_Q")]
    Agent,
    #[serde(rename = "THEME_Q")]
    Theme,
    #[serde(rename = "GENERIC_Q")]
    Generic,
}

impl QuestionKind {
    pub fn for_role(role: Role) -> Self {
        match role {
            Role::Agent => QuestionKind::Agent,
            Role::Theme => QuestionKind::Theme,
        }
    }

    pub fn role(self) -> Option<Role> {
        match self {
            QuestionKind::Agent => Some(Role::Agent),
            QuestionKind::Theme => Some(Role::Theme),
            QuestionKind::Generic => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::Agent => "AGENT_Q",
            QuestionKind::Theme => "THEME_Q",
            QuestionKind::Generic => "GENERIC_Q",
        }
    }
}

pub const GENERIC_QUESTION: &str = "what else happened?";

/// Renders the question template for `kind`. `entity` is ignored for the
/// generic question.
pub fn question_surface(kind: QuestionKind, entity: &str) -> String {
    match kind {
        QuestionKind::Agent => format!("what else did {} do?", entity.trim()),
        QuestionKind::Theme => format!("what else happened to {}?", entity.trim()),
        QuestionKind::Generic => GENERIC_QUESTION.to_string(),
    }
}

/// Recovers kind and entity text from a rendered question.
pub fn parse_question_surface(surface: &str) -> Option<(QuestionKind, Option<String>)> {
    let s = surface.trim();
    if s == GENERIC_QUESTION {
        return Some((QuestionKind::Generic, None));
    }
    if let Some(entity) = s
        .strip_prefix("what else happened to ")
        .and_then(|r| r.strip_suffix('?'))
    {
        return Some((QuestionKind::Theme, Some(entity.to_string())));
    }
    if let Some(entity) = s
        .strip_prefix("what else did ")
        .and_then(|r| r.strip_suffix(" do?"))
    {
        return Some((QuestionKind::Agent, Some(entity.to_string())));
    }
    None
}

/// A role-based or generic question. The entity is present exactly for the
/// role questions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    kind: QuestionKind,
    entity: Option<NounPhraseMention>,
    surface: String,
}

impl Question {
    pub fn about(kind: QuestionKind, entity: NounPhraseMention) -> Option<Self> {
        if kind == QuestionKind::Generic {
            return None;
        }
        let surface = question_surface(kind, &entity.text);
        Some(Question {
            kind,
            entity: Some(entity),
            surface,
        })
    }

    pub fn agent(entity: NounPhraseMention) -> Self {
        Self::about(QuestionKind::Agent, entity).expect("agent question")
    }

    pub fn theme(entity: NounPhraseMention) -> Self {
        Self::about(QuestionKind::Theme, entity).expect("theme question")
    }

    pub fn generic() -> Self {
        Question {
            kind: QuestionKind::Generic,
            entity: None,
            surface: GENERIC_QUESTION.to_string(),
        }
    }

    pub fn kind(&self) -> QuestionKind {
        self.kind
    }

    pub fn entity(&self) -> Option<&NounPhraseMention> {
        self.entity.as_ref()
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }
}

/// One mined (Context, Question, Answer) training instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CqaInstance {
    pub document_id: String,
    pub context: Vec<Event>,
    pub question: Question,
    pub answer: Event,
    /// Role-bearing noun phrases of the last context event, kept so that
    /// marginalized scoring can enumerate the applicable questions later.
    pub context_entities: Vec<String>,
}

/// Question as stored in instance files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub kind: QuestionKind,
    pub entity: Option<String>,
    pub surface: String,
}

/// Text-level instance as stored in instance files: one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub document_id: String,
    pub context: Vec<String>,
    pub question: QuestionRecord,
    pub answer: String,
    #[serde(default)]
    pub context_entities: Vec<String>,
}

impl From<&CqaInstance> for InstanceRecord {
    fn from(inst: &CqaInstance) -> Self {
        InstanceRecord {
            document_id: inst.document_id.clone(),
            context: inst.context.iter().map(serialize_event).collect(),
            question: QuestionRecord {
                kind: inst.question.kind(),
                entity: inst.question.entity().map(|m| m.text.clone()),
                surface: inst.question.surface().to_string(),
            },
            answer: serialize_event(&inst.answer),
            context_entities: inst.context_entities.clone(),
        }
    }
}

impl InstanceRecord {
    pub fn last_context(&self) -> Option<&str> {
        self.context.last().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, p: &str, o: &str) -> Event {
        Event::new(s, p, o, 0, 0).unwrap()
    }

    #[test]
    fn serialize_joins_fields() {
        assert_eq!(serialize_event(&ev("the thief", "stole", "a rifle")), "the thief stole a rifle");
        assert_eq!(serialize_event(&ev("he", "fled", "")), "he fled");
    }

    #[test]
    fn parse_forms() {
        let e = parse_event_text("police|arrested|him", 2, 2).unwrap();
        assert_eq!(e, Event::new("police", "arrested", "him", 2, 2).unwrap());
        let e = parse_event_text("he fled", 1, 1).unwrap();
        assert_eq!((e.subject.as_str(), e.predicate.as_str(), e.object.as_str()), ("he", "fled", ""));
        assert!(matches!(parse_event_text("arrested", 0, 0), Err(TypeError::MalformedEvent(_))));
        assert!(matches!(parse_event_text("x|", 0, 0), Err(TypeError::MalformedEvent(_))));
    }

    #[test]
    fn empty_predicate_rejected() {
        assert_eq!(Event::new("a", "  ", "b", 0, 0), Err(TypeError::EmptyPredicate));
    }

    #[test]
    fn question_templates() {
        let m = NounPhraseMention {
            text: "the thief".into(),
            sentence_index: 0,
            span: TokenSpan::new(0, 2),
            role: Some(Role::Agent),
            cluster_id: None,
        };
        assert_eq!(Question::agent(m.clone()).surface(), "what else did the thief do?");
        assert_eq!(Question::theme(m.clone()).surface(), "what else happened to the thief?");
        assert_eq!(Question::generic().surface(), "what else happened?");
        assert!(Question::generic().entity().is_none());
        assert!(Question::about(QuestionKind::Generic, m).is_none());
    }

    fn field() -> impl Strategy<Value = String> {
        proptest::collection::vec("[a-z]{1,8}", 1..4).prop_map(|w| w.join(" "))
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z]{1,8}"
    }

    proptest! {
        #[test]
        fn delimited_round_trip(s in field(), p in field(), o in proptest::option::of(field()), si in 0usize..50, ei in 0usize..50) {
            let e = Event::new(s, p, o.unwrap_or_default(), si, ei).unwrap();
            prop_assert_eq!(parse_event_text(&e.delimited(), si, ei).unwrap(), e);
        }

        #[test]
        fn surface_round_trip_single_token_fields(s in word(), p in word(), o in proptest::option::of(word())) {
            let e = Event::new(s, p, o.unwrap_or_default(), 3, 7).unwrap();
            prop_assert_eq!(parse_event_text(&serialize_event(&e), 3, 7).unwrap(), e);
        }

        #[test]
        fn question_surface_parses_back(entity in field(), k in 0u8..3) {
            let kind = [QuestionKind::Agent, QuestionKind::Theme, QuestionKind::Generic][k as usize];
            let surface = question_surface(kind, &entity);
            let (pk, pe) = parse_question_surface(&surface).unwrap();
            prop_assert_eq!(pk, kind);
            if kind != QuestionKind::Generic {
                prop_assert_eq!(pe.unwrap(), entity);
            }
        }
    }
}
