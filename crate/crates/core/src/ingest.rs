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

//! Loading and validation of pre-annotated documents.
//!
//! Each corpus line is one JSON document carrying tokens, reduced dependency
//! roles, coreference clusters and OpenIE tuples. Parsing, coreference and
//! extraction happen upstream; this module only checks the exchange schema
//! and builds the in-memory [`AnnotatedDocument`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ClusterId, CorefCluster, DepRole, Event, NounPhraseMention, TokenSpan};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed record: {source}")]
    CorpusFormat {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What to do with a record that fails to parse or validate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Skip the record and report it.
    #[default]
    Lenient,
    /// Abort the load on the first bad record.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounPhraseRecord {
    pub text: String,
    pub span: TokenSpan,
    pub role: DepRole,
    #[serde(default)]
    pub cluster_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub subject: String,
    pub predicate: String,
    #[serde(default)]
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub noun_phrases: Vec<NounPhraseRecord>,
    #[serde(default)]
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterMentionRecord {
    pub sentence: usize,
    pub span: TokenSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub cluster_id: String,
    pub mentions: Vec<ClusterMentionRecord>,
}

/// One corpus line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub document_id: String,
    pub sentences: Vec<SentenceRecord>,
    #[serde(default)]
    pub clusters: Vec<ClusterRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub index: usize,
    pub tokens: Vec<String>,
    pub dependency_roles: BTreeMap<TokenSpan, DepRole>,
    pub noun_phrases: Vec<NounPhraseMention>,
    pub events: Vec<Event>,
}

impl AnnotatedSentence {
    pub fn dependency_role(&self, span: TokenSpan) -> DepRole {
        self.dependency_roles.get(&span).copied().unwrap_or(DepRole::Other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub document_id: String,
    pub sentences: Vec<AnnotatedSentence>,
    pub clusters: Vec<CorefCluster>,
}

impl AnnotatedDocument {
    /// Validates a record and resolves cluster membership in both directions:
    /// noun phrases learn their cluster from the cluster list and clusters
    /// list every noun phrase that names them.
    pub fn from_record(record: DocumentRecord) -> Result<Self, String> {
        let mut span_cluster: BTreeMap<(usize, TokenSpan), String> = BTreeMap::new();
        let mut cluster_members: BTreeMap<String, BTreeSet<(usize, TokenSpan)>> = BTreeMap::new();
        for cluster in &record.clusters {
            if cluster.mentions.is_empty() {
                return Err(format!("cluster {} has no mentions", cluster.cluster_id));
            }
            let members = cluster_members.entry(cluster.cluster_id.clone()).or_default();
            for m in &cluster.mentions {
                let sentence = record.sentences.get(m.sentence).ok_or_else(|| {
                    format!(
                        "cluster {} references sentence {} of a {}-sentence document",
                        cluster.cluster_id,
                        m.sentence,
                        record.sentences.len()
                    )
                })?;
                if !m.span.fits(sentence.tokens.len()) {
                    return Err(format!(
                        "cluster {} mention span {:?} outside sentence {}",
                        cluster.cluster_id, m.span, m.sentence
                    ));
                }
                if let Some(other) = span_cluster.insert((m.sentence, m.span), cluster.cluster_id.clone()) {
                    if other != cluster.cluster_id {
                        return Err(format!(
                            "span {:?} of sentence {} is in clusters {} and {}",
                            m.span, m.sentence, other, cluster.cluster_id
                        ));
                    }
                }
                members.insert((m.sentence, m.span));
            }
        }

        let mut sentences = Vec::with_capacity(record.sentences.len());
        let mut event_index = 0;
        for (si, s) in record.sentences.iter().enumerate() {
            let mut dependency_roles = BTreeMap::new();
            let mut noun_phrases = Vec::with_capacity(s.noun_phrases.len());
            for np in &s.noun_phrases {
                if !np.span.fits(s.tokens.len()) {
                    return Err(format!(
                        "noun phrase {:?} span {:?} outside sentence {} ({} tokens)",
                        np.text,
                        np.span,
                        si,
                        s.tokens.len()
                    ));
                }
                if np.text.trim().is_empty() {
                    return Err(format!("empty noun phrase text in sentence {si}"));
                }
                if let Some(prev) = dependency_roles.insert(np.span, np.role) {
                    if prev != np.role {
                        return Err(format!("span {:?} of sentence {si} has two roles", np.span));
                    }
                }
                let listed = span_cluster.get(&(si, np.span));
                let cluster_id = match (&np.cluster_id, listed) {
                    (Some(own), Some(listed)) if own != listed => {
                        return Err(format!(
                            "noun phrase {:?} claims cluster {own} but is listed in {listed}",
                            np.text
                        ))
                    }
                    (Some(own), _) => Some(own.clone()),
                    (None, listed) => listed.cloned(),
                };
                if let Some(c) = &cluster_id {
                    cluster_members.entry(c.clone()).or_default().insert((si, np.span));
                }
                noun_phrases.push(NounPhraseMention {
                    text: np.text.clone(),
                    sentence_index: si,
                    span: np.span,
                    role: np.role.semantic_role(),
                    cluster_id: cluster_id.map(ClusterId),
                });
            }
            let mut events = Vec::with_capacity(s.events.len());
            for e in &s.events {
                let event = Event::new(&e.subject, &e.predicate, &e.object, si, event_index)
                    .map_err(|err| format!("sentence {si}: {err}"))?;
                events.push(event);
                event_index += 1;
            }
            sentences.push(AnnotatedSentence {
                index: si,
                tokens: s.tokens.clone(),
                dependency_roles,
                noun_phrases,
                events,
            });
        }

        let clusters = cluster_members
            .into_iter()
            .map(|(id, members)| {
                let cluster_id = ClusterId(id);
                let mentions = members
                    .into_iter()
                    .map(|(si, span)| {
                        let sentence = &sentences[si];
                        sentence
                            .noun_phrases
                            .iter()
                            .find(|np| np.span == span)
                            .cloned()
                            .unwrap_or_else(|| NounPhraseMention {
                                text: sentence.tokens[span.start..span.end].join(" "),
                                sentence_index: si,
                                span,
                                role: sentence.dependency_role(span).semantic_role(),
                                cluster_id: Some(cluster_id.clone()),
                            })
                    })
                    .collect();
                CorefCluster { cluster_id, mentions }
            })
            .collect();

        Ok(AnnotatedDocument {
            document_id: record.document_id,
            sentences,
            clusters,
        })
    }

    pub fn to_record(&self) -> DocumentRecord {
        DocumentRecord {
            document_id: self.document_id.clone(),
            sentences: self
                .sentences
                .iter()
                .map(|s| SentenceRecord {
                    tokens: s.tokens.clone(),
                    noun_phrases: s
                        .noun_phrases
                        .iter()
                        .map(|np| NounPhraseRecord {
                            text: np.text.clone(),
                            span: np.span,
                            role: s.dependency_role(np.span),
                            cluster_id: np.cluster_id.as_ref().map(|c| c.0.clone()),
                        })
                        .collect(),
                    events: s
                        .events
                        .iter()
                        .map(|e| EventRecord {
                            subject: e.subject.clone(),
                            predicate: e.predicate.clone(),
                            object: e.object.clone(),
                        })
                        .collect(),
                })
                .collect(),
            clusters: self
                .clusters
                .iter()
                .map(|c| ClusterRecord {
                    cluster_id: c.cluster_id.0.clone(),
                    mentions: c
                        .mentions
                        .iter()
                        .map(|m| ClusterMentionRecord {
                            sentence: m.sentence_index,
                            span: m.span,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn sentence_of(&self, event: &Event) -> Option<&AnnotatedSentence> {
        self.sentences.get(event.sentence_index)
    }
}

/// Document events in discourse order: sentence order, then the order the
/// extractor emitted them within a sentence.
pub fn extract_event_sequence(doc: &AnnotatedDocument) -> Vec<Event> {
    let seq: Vec<Event> = doc.sentences.iter().flat_map(|s| s.events.iter().cloned()).collect();
    debug_assert!(seq.iter().enumerate().all(|(i, e)| e.event_index == i));
    seq
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub documents: Vec<AnnotatedDocument>,
    /// Records skipped under lenient loading, with 1-based line numbers.
    pub issues: Vec<LoadIssue>,
}

pub fn read_corpus<R: BufRead>(reader: R, strictness: Strictness) -> Result<LoadedCorpus, IngestError> {
    let mut corpus = LoadedCorpus::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(source) => {
                if strictness == Strictness::Strict {
                    return Err(IngestError::CorpusFormat { line: line_no, source });
                }
                tracing::warn!(line = line_no, error = %source, "skipping malformed corpus record");
                corpus.issues.push(LoadIssue {
                    line: line_no,
                    message: source.to_string(),
                });
                continue;
            }
        };
        match AnnotatedDocument::from_record(record) {
            Ok(doc) => corpus.documents.push(doc),
            Err(message) => {
                if strictness == Strictness::Strict {
                    return Err(IngestError::Validation { line: line_no, message });
                }
                tracing::warn!(line = line_no, %message, "skipping invalid document");
                corpus.issues.push(LoadIssue { line: line_no, message });
            }
        }
    }
    Ok(corpus)
}

pub fn load_corpus(path: impl AsRef<Path>, strictness: Strictness) -> Result<LoadedCorpus, IngestError> {
    let file = File::open(path)?;
    read_corpus(BufReader::new(file), strictness)
}

pub fn write_corpus<W: Write>(mut writer: W, docs: &[AnnotatedDocument]) -> Result<(), IngestError> {
    for doc in docs {
        let line = serde_json::to_string(&doc.to_record()).expect("document records always serialize");
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const MINI: &str = include_str!("../tests/data/mini_corpus.jsonl");

    #[test]
    fn loads_three_records() {
        let three = format!("{}{}{}", MINI, MINI.replace("mini-0", "mini-1"), MINI.replace("mini-0", "mini-2"));
        let corpus = read_corpus(Cursor::new(three), Strictness::Strict).unwrap();
        assert_eq!(corpus.documents.len(), 3);
        assert!(corpus.issues.is_empty());
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let corpus = read_corpus(Cursor::new(""), Strictness::Strict).unwrap();
        assert!(corpus.documents.is_empty());
    }

    #[test]
    fn cluster_out_of_range_is_validation_error() {
        let mut rec: DocumentRecord = serde_json::from_str(MINI.trim()).unwrap();
        rec.clusters[0].mentions.push(ClusterMentionRecord {
            sentence: 7,
            span: TokenSpan::new(0, 1),
        });
        let line = serde_json::to_string(&rec).unwrap();
        let err = read_corpus(Cursor::new(line.clone()), Strictness::Strict).unwrap_err();
        assert!(matches!(err, IngestError::Validation { line: 1, .. }), "{err}");

        let lenient = read_corpus(Cursor::new(format!("{line}\n{MINI}")), Strictness::Lenient).unwrap();
        assert_eq!(lenient.documents.len(), 1);
        assert_eq!(lenient.issues.len(), 1);
        assert_eq!(lenient.issues[0].line, 1);
    }

    #[test]
    fn malformed_json_strict_and_lenient() {
        let text = format!("{{not json\n{MINI}");
        assert!(matches!(
            read_corpus(Cursor::new(text.clone()), Strictness::Strict),
            Err(IngestError::CorpusFormat { line: 1, .. })
        ));
        let lenient = read_corpus(Cursor::new(text), Strictness::Lenient).unwrap();
        assert_eq!(lenient.documents.len(), 1);
    }

    #[test]
    fn np_span_outside_tokens_rejected() {
        let mut rec: DocumentRecord = serde_json::from_str(MINI.trim()).unwrap();
        rec.sentences[0].noun_phrases[0].span = TokenSpan::new(3, 40);
        assert!(AnnotatedDocument::from_record(rec).is_err());
    }

    #[test]
    fn conflicting_cluster_claim_rejected() {
        let mut rec: DocumentRecord = serde_json::from_str(MINI.trim()).unwrap();
        rec.sentences[0].noun_phrases[0].cluster_id = Some("other".into());
        assert!(AnnotatedDocument::from_record(rec).is_err());
    }

    #[test]
    fn sequence_concatenates_sentences() {
        let corpus = read_corpus(Cursor::new(MINI), Strictness::Strict).unwrap();
        let seq = extract_event_sequence(&corpus.documents[0]);
        let texts: Vec<String> = seq.iter().map(|e| e.text()).collect();
        assert_eq!(texts, ["the thief stole a rifle", "he fled the scene", "police arrested him"]);
        assert_eq!(seq.iter().map(|e| e.event_index).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn no_events_no_sequence() {
        let rec = DocumentRecord {
            document_id: "empty".into(),
            sentences: vec![SentenceRecord {
                tokens: vec!["nothing".into()],
                noun_phrases: vec![],
                events: vec![],
            }],
            clusters: vec![],
        };
        let doc = AnnotatedDocument::from_record(rec).unwrap();
        assert!(extract_event_sequence(&doc).is_empty());
    }

    #[test]
    fn write_then_read_round_trips() {
        let corpus = read_corpus(Cursor::new(MINI), Strictness::Strict).unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &corpus.documents).unwrap();
        let again = read_corpus(Cursor::new(buf), Strictness::Strict).unwrap();
        assert_eq!(again.documents, corpus.documents);
    }
}
