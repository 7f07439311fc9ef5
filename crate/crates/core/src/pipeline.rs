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

//! Mining (Context, Question, Answer) instances from annotated documents.
//!
//! For every event `e_t` of a document, each role-bearing noun phrase of the
//! event yields an agent question and a theme question. A question is
//! answered by the first later event `e_k` that mentions the same entity
//! (same coreference cluster, or same text when unclustered) in the asked
//! role. Unanswered questions are dropped; when none of the questions of
//! `e_t` is answered, the generic question is answered by `e_{t+1}`.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::ingest::{extract_event_sequence, AnnotatedDocument, AnnotatedSentence};
use crate::text;
use crate::types::{
    CqaInstance, Event, InstanceRecord, NounPhraseMention, Question, QuestionKind, Role,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnswerScope {
    /// Only the earliest answering event.
    #[default]
    FirstMatch,
    /// One instance per answering event.
    AllMatches,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub min_context_len: usize,
    pub answer_scope: AnswerScope,
    pub emit_fallback: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            min_context_len: 1,
            answer_scope: AnswerScope::FirstMatch,
            emit_fallback: true,
        }
    }
}

/// Sentence noun phrases that occur, as whole tokens, in the event text.
pub fn detect_noun_phrases(event: &Event, sentence: &AnnotatedSentence) -> Vec<NounPhraseMention> {
    debug_assert_eq!(event.sentence_index, sentence.index);
    let event_tokens = text::tokens(&event.text());
    sentence
        .noun_phrases
        .iter()
        .filter(|np| text::find_phrase(&event_tokens, &text::tokens(&np.text)).is_some())
        .cloned()
        .collect()
}

pub fn assign_role(np: &NounPhraseMention, sentence: &AnnotatedSentence) -> Option<Role> {
    sentence.dependency_role(np.span).semantic_role()
}

/// The agent question followed by the theme question.
pub fn generate_questions(np: &NounPhraseMention) -> Vec<Question> {
    vec![Question::agent(np.clone()), Question::theme(np.clone())]
}

fn answers_question(
    event: &Event,
    entity: &NounPhraseMention,
    role: Role,
    doc: &AnnotatedDocument,
) -> bool {
    let Some(sentence) = doc.sentence_of(event) else {
        return false;
    };
    detect_noun_phrases(event, sentence)
        .iter()
        .any(|np| np.corefers_with(entity) && assign_role(np, sentence) == Some(role))
}

/// Every `k > t` whose event answers `question`, in ascending order.
pub fn find_answers<'a>(
    seq: &'a [Event],
    t: usize,
    question: &Question,
    doc: &AnnotatedDocument,
) -> Vec<(usize, &'a Event)> {
    let (Some(entity), Some(role)) = (question.entity(), question.kind().role()) else {
        return Vec::new();
    };
    seq.iter()
        .enumerate()
        .skip(t + 1)
        .filter(|(_, e)| answers_question(e, entity, role, doc))
        .collect()
}

/// The earliest event after `t` that answers `question`.
pub fn find_answer<'a>(
    seq: &'a [Event],
    t: usize,
    question: &Question,
    doc: &AnnotatedDocument,
) -> Option<(usize, &'a Event)> {
    let (entity, role) = (question.entity()?, question.kind().role()?);
    seq.iter()
        .enumerate()
        .skip(t + 1)
        .find(|(_, e)| answers_question(e, entity, role, doc))
}

/// Role-bearing noun phrases of an event, as used for questioning.
pub fn questionable_entities(event: &Event, doc: &AnnotatedDocument) -> Vec<NounPhraseMention> {
    let Some(sentence) = doc.sentence_of(event) else {
        return Vec::new();
    };
    detect_noun_phrases(event, sentence)
        .into_iter()
        .filter(|np| assign_role(np, sentence).is_some())
        .collect()
}

fn entity_texts(nps: &[NounPhraseMention]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for np in nps {
        let t = text::normalize(&np.text);
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

pub fn build_instances(doc: &AnnotatedDocument, cfg: &PipelineConfig) -> Vec<CqaInstance> {
    let seq = extract_event_sequence(doc);
    let mut out = Vec::new();
    for t in 0..seq.len() {
        if t + 1 < cfg.min_context_len.max(1) {
            continue;
        }
        let context = &seq[..=t];
        let entities = questionable_entities(&seq[t], doc);
        let context_entities = entity_texts(&entities);
        let mut answered = false;
        for np in &entities {
            for question in generate_questions(np) {
                let answers = match cfg.answer_scope {
                    AnswerScope::FirstMatch => find_answer(&seq, t, &question, doc).into_iter().collect(),
                    AnswerScope::AllMatches => find_answers(&seq, t, &question, doc),
                };
                for (_, answer) in answers {
                    answered = true;
                    out.push(CqaInstance {
                        document_id: doc.document_id.clone(),
                        context: context.to_vec(),
                        question: question.clone(),
                        answer: answer.clone(),
                        context_entities: context_entities.clone(),
                    });
                }
            }
        }
        if cfg.emit_fallback && !answered && t + 1 < seq.len() {
            out.push(CqaInstance {
                document_id: doc.document_id.clone(),
                context: context.to_vec(),
                question: Question::generic(),
                answer: seq[t + 1].clone(),
                context_entities,
            });
        }
    }
    out
}

/// Instance counts per question kind. `q1` is the generic question, `q2`
/// the agent question and `q3` the theme question.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub total: usize,
    pub q1: usize,
    pub q2: usize,
    pub q3: usize,
}

pub fn corpus_stats(kinds: impl IntoIterator<Item = QuestionKind>) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for kind in kinds {
        stats.total += 1;
        match kind {
            QuestionKind::Generic => stats.q1 += 1,
            QuestionKind::Agent => stats.q2 += 1,
            QuestionKind::Theme => stats.q3 += 1,
        }
    }
    stats
}

/// Writes instance records, one JSON object per line.
pub fn write_instances<W: Write>(mut writer: W, records: &[InstanceRecord]) -> std::io::Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(std::io::Error::other)?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(reader: R) -> std::io::Result<Vec<InstanceRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{read_corpus, Strictness};
    use std::io::Cursor;

    fn mini() -> AnnotatedDocument {
        let text = include_str!("../tests/data/mini_corpus.jsonl");
        read_corpus(Cursor::new(text), Strictness::Strict).unwrap().documents.remove(0)
    }

    fn np<'a>(doc: &'a AnnotatedDocument, s: usize, text: &str) -> &'a NounPhraseMention {
        doc.sentences[s].noun_phrases.iter().find(|n| n.text == text).unwrap()
    }

    #[test]
    fn detects_event_noun_phrases() {
        let doc = mini();
        let s = &doc.sentences[0];
        let found: Vec<_> = detect_noun_phrases(&s.events[0], s).into_iter().map(|n| n.text).collect();
        assert_eq!(found, ["the thief", "a rifle"]);
    }

    #[test]
    fn detection_keeps_partial_phrase() {
        let mut doc = mini();
        doc.sentences[0].noun_phrases[1].text = "rifle".into();
        let s = &doc.sentences[0];
        let found: Vec<_> = detect_noun_phrases(&s.events[0], s).into_iter().map(|n| n.text).collect();
        assert_eq!(found, ["the thief", "rifle"]);
    }

    #[test]
    fn detection_without_noun_phrases() {
        let mut doc = mini();
        doc.sentences[0].noun_phrases.clear();
        doc.sentences[0].events[0] = Event::new("12", "rose", "3", 0, 0).unwrap();
        let s = &doc.sentences[0];
        assert!(detect_noun_phrases(&s.events[0], s).is_empty());
    }

    #[test]
    fn roles_follow_dependency_labels() {
        let doc = mini();
        assert_eq!(assign_role(np(&doc, 0, "the thief"), &doc.sentences[0]), Some(Role::Agent));
        assert_eq!(assign_role(np(&doc, 2, "him"), &doc.sentences[2]), Some(Role::Theme));
        assert_eq!(assign_role(np(&doc, 0, "the store"), &doc.sentences[0]), None);
    }

    #[test]
    fn two_questions_per_phrase() {
        let doc = mini();
        let qs = generate_questions(np(&doc, 0, "the thief"));
        let surfaces: Vec<_> = qs.iter().map(|q| q.surface()).collect();
        assert_eq!(surfaces, ["what else did the thief do?", "what else happened to the thief?"]);
    }

    #[test]
    fn answers_on_mini_corpus() {
        let doc = mini();
        let seq = extract_event_sequence(&doc);
        let thief = np(&doc, 0, "the thief");
        let rifle = np(&doc, 0, "a rifle");
        assert_eq!(find_answer(&seq, 0, &Question::agent(thief.clone()), &doc).map(|a| a.0), Some(1));
        assert_eq!(find_answer(&seq, 0, &Question::theme(thief.clone()), &doc).map(|a| a.0), Some(2));
        assert_eq!(find_answer(&seq, 0, &Question::agent(rifle.clone()), &doc), None);
        assert_eq!(find_answer(&seq, 0, &Question::generic(), &doc), None);
    }

    #[test]
    fn mini_corpus_yields_three_instances() {
        let doc = mini();
        let got: Vec<(Vec<String>, String, String)> = build_instances(&doc, &PipelineConfig::default())
            .iter()
            .map(|i| {
                (
                    i.context.iter().map(|e| e.text()).collect(),
                    i.question.surface().to_string(),
                    i.answer.text(),
                )
            })
            .collect();
        let e1 = "the thief stole a rifle".to_string();
        let e2 = "he fled the scene".to_string();
        let e3 = "police arrested him".to_string();
        assert_eq!(
            got,
            vec![
                (vec![e1.clone()], "what else did the thief do?".into(), e2.clone()),
                (vec![e1.clone()], "what else happened to the thief?".into(), e3.clone()),
                (vec![e1, e2], "what else happened to he?".into(), e3),
            ]
        );
    }

    #[test]
    fn stats_on_mini_corpus() {
        let doc = mini();
        let inst = build_instances(&doc, &PipelineConfig::default());
        let stats = corpus_stats(inst.iter().map(|i| i.question.kind()));
        assert_eq!(stats, CorpusStats { total: 3, q1: 0, q2: 1, q3: 2 });
        assert_eq!(corpus_stats(std::iter::empty()), CorpusStats::default());
    }

    #[test]
    fn single_event_document_yields_nothing() {
        let mut doc = mini();
        doc.sentences.truncate(1);
        doc.clusters.clear();
        assert!(build_instances(&doc, &PipelineConfig::default()).is_empty());
    }

    #[test]
    fn fallback_can_be_disabled_and_context_floor_applies() {
        let doc = mini();
        let cfg = PipelineConfig {
            min_context_len: 2,
            ..PipelineConfig::default()
        };
        let inst = build_instances(&doc, &cfg);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].context.len(), 2);
    }

    #[test]
    fn all_matches_emits_each_answer() {
        let mut doc = mini();
        // make e2's subject answer the theme question too by adding a
        // fourth sentence "police questioned him"
        let mut s3 = doc.sentences[2].clone();
        s3.index = 3;
        s3.events[0] = Event::new("police", "questioned", "him", 3, 3).unwrap();
        for np in &mut s3.noun_phrases {
            np.sentence_index = 3;
        }
        doc.sentences.push(s3);
        let cfg = PipelineConfig {
            answer_scope: AnswerScope::AllMatches,
            ..PipelineConfig::default()
        };
        let inst = build_instances(&doc, &cfg);
        let theme_thief: Vec<_> = inst
            .iter()
            .filter(|i| i.context.len() == 1 && i.question.kind() == QuestionKind::Theme)
            .map(|i| i.answer.event_index)
            .collect();
        assert_eq!(theme_thief, [2, 3]);
    }
}
