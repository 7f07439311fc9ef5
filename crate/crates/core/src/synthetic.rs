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

//! Random annotated documents with script-like structure, for tests,
//! benchmarks and demos.
//!
//! Predicates follow a fixed transition table, so the next event is
//! partly predictable from the current one. A few recurring actors are
//! re-mentioned through pronouns and tracked in coreference clusters;
//! props are never clustered. Some sentences carry two events or an
//! extra prepositional noun phrase.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    AnnotatedDocument, ClusterMentionRecord, ClusterRecord, DocumentRecord, EventRecord, NounPhraseRecord,
    SentenceRecord,
};
use crate::types::{DepRole, TokenSpan};

struct Actor {
    name: &'static str,
    subject: &'static str,
    object: &'static str,
}

const ACTORS: &[Actor] = &[
    Actor { name: "the thief", subject: "he", object: "him" },
    Actor { name: "the police", subject: "they", object: "them" },
    Actor { name: "the mayor", subject: "she", object: "her" },
    Actor { name: "the crowd", subject: "they", object: "them" },
    Actor { name: "the doctor", subject: "she", object: "her" },
    Actor { name: "the guard", subject: "he", object: "him" },
];

const PROPS: &[&str] = &[
    "a rifle", "the car", "the bank", "the scene", "a warning", "the money", "the door", "a report", "the truck",
    "a letter", "the house", "a knife", "the bridge", "a witness", "the shop", "the evidence",
];

const ADJECTIVES: &[&str] = &[
    "old", "new", "stolen", "red", "black", "small", "large", "broken", "hidden", "empty", "local", "second",
    "famous", "quiet", "rusty", "wooden", "public", "private", "damaged", "missing",
];

const PLACES: &[&str] = &["the city", "the station", "the river", "the night"];

/// Predicates and their likely successors.
const PREDICATES: &[(&str, &[usize])] = &[
    ("robbed", &[1, 2]),
    ("fled", &[2, 3]),
    ("chased", &[3, 4]),
    ("arrested", &[4, 5]),
    ("questioned", &[5, 6]),
    ("charged", &[6, 7]),
    ("sentenced", &[7, 0]),
    ("released", &[8, 0]),
    ("warned", &[9, 1]),
    ("praised", &[0, 10]),
    ("thanked", &[11, 8]),
    ("visited", &[0, 9]),
];

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Probability that a re-mentioned actor is written as a pronoun.
    pub pronoun_prob: f64,
    pub two_event_prob: f64,
    pub place_prob: f64,
    /// Probability that a prop or place gets a random adjective.
    pub adjective_prob: f64,
    /// Probability of leaving the transition table for a random predicate.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 100,
            min_sentences: 3,
            max_sentences: 8,
            pronoun_prob: 0.4,
            two_event_prob: 0.15,
            place_prob: 0.2,
            adjective_prob: 0.0,
            noise: 0.1,
            seed: 0,
        }
    }
}

/// Every actor name, usable as an entity lexicon.
pub fn actor_names() -> Vec<String> {
    ACTORS.iter().map(|a| a.name.to_string()).collect()
}

#[derive(Default)]
struct SentenceBuilder {
    tokens: Vec<String>,
    nps: Vec<NounPhraseRecord>,
    events: Vec<EventRecord>,
}

impl SentenceBuilder {
    fn push_word(&mut self, w: &str) {
        self.tokens.extend(w.split(' ').map(str::to_string));
    }

    fn push_np(&mut self, text: &str, role: DepRole, cluster: Option<String>) -> TokenSpan {
        let start = self.tokens.len();
        self.push_word(text);
        let span = TokenSpan::new(start, self.tokens.len());
        self.nps.push(NounPhraseRecord {
            text: text.to_string(),
            span,
            role,
            cluster_id: cluster,
        });
        span
    }
}

struct DocState<'a> {
    rng: &'a mut ChaCha8Rng,
    cfg: &'a SyntheticConfig,
    seen: Vec<bool>,
    mentions: Vec<Vec<(usize, TokenSpan)>>,
}

enum Filler {
    Actor(usize),
    Prop(String),
}

impl DocState<'_> {
    fn surface(&mut self, actor: usize, role: DepRole) -> &'static str {
        let a = &ACTORS[actor];
        if self.seen[actor] && self.rng.gen_bool(self.cfg.pronoun_prob) {
            if role == DepRole::Subject {
                a.subject
            } else {
                a.object
            }
        } else {
            a.name
        }
    }

    fn mention(&mut self, b: &mut SentenceBuilder, sentence: usize, f: &Filler, role: DepRole) -> String {
        match *f {
            Filler::Actor(a) => {
                let text = self.surface(a, role);
                let span = b.push_np(text, role, Some(format!("c{a}")));
                self.seen[a] = true;
                self.mentions[a].push((sentence, span));
                text.to_string()
            }
            Filler::Prop(ref p) => {
                b.push_np(p, role, None);
                p.clone()
            }
        }
    }

    fn object(&mut self, subject: usize) -> Filler {
        if self.rng.gen_bool(0.6) {
            let mut a = self.rng.gen_range(0..ACTORS.len());
            if a == subject {
                a = (a + 1) % ACTORS.len();
            }
            Filler::Actor(a)
        } else {
            let p = *PROPS.choose(self.rng).expect("non-empty");
            Filler::Prop(self.decorate(p))
        }
    }

    fn decorate(&mut self, np: &str) -> String {
        if !self.rng.gen_bool(self.cfg.adjective_prob) {
            return np.to_string();
        }
        let adj = ADJECTIVES.choose(self.rng).expect("non-empty");
        match np.split_once(' ') {
            Some((det, head)) => format!("{det} {adj} {head}"),
            None => format!("{adj} {np}"),
        }
    }

    fn next_predicate(&mut self, current: usize) -> usize {
        if self.rng.gen_bool(self.cfg.noise) {
            self.rng.gen_range(0..PREDICATES.len())
        } else {
            *PREDICATES[current].1.choose(self.rng).expect("non-empty")
        }
    }
}

fn document(id: usize, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> AnnotatedDocument {
    let n = rng.gen_range(cfg.min_sentences..=cfg.max_sentences.max(cfg.min_sentences));
    let protagonist = rng.gen_range(0..ACTORS.len());
    let mut pred = rng.gen_range(0..PREDICATES.len());
    let mut st = DocState {
        rng,
        cfg,
        seen: vec![false; ACTORS.len()],
        mentions: vec![Vec::new(); ACTORS.len()],
    };
    let mut sentences = Vec::with_capacity(n);
    for si in 0..n {
        let mut b = SentenceBuilder::default();
        let subject = if st.rng.gen_bool(0.6) {
            protagonist
        } else {
            st.rng.gen_range(0..ACTORS.len())
        };
        let subj_text = st.mention(&mut b, si, &Filler::Actor(subject), DepRole::Subject);
        let events = if st.rng.gen_bool(cfg.two_event_prob) { 2 } else { 1 };
        for k in 0..events {
            if k > 0 {
                b.push_word("and");
                pred = st.next_predicate(pred);
            }
            b.push_word(PREDICATES[pred].0);
            let obj = st.object(subject);
            let obj_text = st.mention(&mut b, si, &obj, DepRole::Object);
            b.events.push(EventRecord {
                subject: subj_text.clone(),
                predicate: PREDICATES[pred].0.to_string(),
                object: obj_text,
            });
        }
        if st.rng.gen_bool(cfg.place_prob) {
            b.push_word("in");
            let place = *PLACES.choose(st.rng).expect("non-empty");
            let place = st.decorate(place);
            b.push_np(&place, DepRole::Other, None);
        }
        b.push_word(".");
        sentences.push(SentenceRecord {
            tokens: b.tokens,
            noun_phrases: b.nps,
            events: b.events,
        });
        pred = st.next_predicate(pred);
    }
    let clusters = st
        .mentions
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(a, m)| ClusterRecord {
            cluster_id: format!("c{a}"),
            mentions: m
                .iter()
                .map(|&(sentence, span)| ClusterMentionRecord { sentence, span })
                .collect(),
        })
        .collect();
    let record = DocumentRecord {
        document_id: format!("syn-{id}"),
        sentences,
        clusters,
    };
    AnnotatedDocument::from_record(record).expect("synthetic documents are well formed")
}

pub fn synthetic_corpus(cfg: &SyntheticConfig) -> Vec<AnnotatedDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.documents).map(|i| document(i, cfg, &mut rng)).collect()
}
