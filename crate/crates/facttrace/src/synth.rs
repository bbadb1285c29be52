//! Deterministic synthetic fact-tracing worlds.
//!
//! A world plants a set of topics, each carrying a three-word signature
//! that appears in every document of the topic. Facts are (entity,
//! quantity, unit, year) tuples inside a topic; each queried fact gets a
//! handful of supporting paraphrase documents plus contradictory
//! near-duplicates that flip the relation word while keeping every token a
//! lexical matcher would key on. Supportiveness is defined by the generated
//! rule table, which is exactly what the scripted LLM oracle consumes, so
//! the whole pipeline runs offline with known ground truth.
//!
//! Two transformations model the paper-style stress tests:
//! [`pad_with_distractors`] grows the corpus with inert filler plus
//! query-shadow documents that copy a query's rare tokens without
//! supporting it (lexical rankers chase them, the rule table does not), and
//! [`perturbed`] rewrites query surfaces by swapping entity, quantity,
//! unit, and frame words for their synonym twins and shuffling token order,
//! while topic signatures stay put.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Query};
use crate::llm::scripted::{FactRule, OracleRules};

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub topics: usize,
    pub docs: usize,
    pub queries: usize,
    /// Inclusive range for supporting documents per queried fact.
    pub min_support: usize,
    pub max_support: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            topics: 40,
            docs: 2000,
            queries: 60,
            min_support: 2,
            max_support: 6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub corpus: Corpus,
    pub queries: Vec<Query>,
    pub rules: OracleRules,
}

impl SynthWorld {
    /// Writes corpus.jsonl, queries.jsonl and rules.json into `dir`.
    pub fn save_to_dir(&self, dir: impl AsRef<std::path::Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let err = |e: String| std::io::Error::other(e);
        self.corpus
            .save(dir.join("corpus.jsonl"))
            .map_err(|e| err(e.to_string()))?;
        crate::corpus::save_queries(&self.queries, dir.join("queries.jsonl"))
            .map_err(|e| err(e.to_string()))?;
        self.rules
            .save(dir.join("rules.json"))
            .map_err(|e| err(e.to_string()))?;
        Ok(())
    }
}

/// Unique pseudo-word factory. Words are syllable chains, deterministic in
/// the RNG, and never repeat within one forge.
struct WordForge {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

const ONSETS: &[&str] = &[
    "b", "br", "d", "dr", "f", "g", "gl", "k", "kr", "l", "m", "n", "p", "pr", "r", "s", "st",
    "t", "tr", "v", "z",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ar", "en", "il", "on", "ul"];

impl WordForge {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: HashSet::new(),
        }
    }

    fn word(&mut self, syllables: usize) -> String {
        loop {
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS[self.rng.random_range(0..ONSETS.len())]);
                w.push_str(NUCLEI[self.rng.random_range(0..NUCLEI.len())]);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

/// Quantity values get a word form ("quaunsep" for 417) whose synonym twin
/// is the digit form; a paraphraser swapping spelled numbers for digits is
/// exactly the kind of rewrite lexical matchers cannot follow.
fn quantity_word(value: u32) -> String {
    const DIGIT_SYLLABLES: [&str; 10] =
        ["zo", "un", "du", "tri", "qua", "pen", "hex", "sep", "oc", "non"];
    value
        .to_string()
        .bytes()
        .map(|b| DIGIT_SYLLABLES[(b - b'0') as usize])
        .collect()
}

const UNIT_PAIRS: &[(&str, &str)] = &[
    ("tonnes", "tons"),
    ("litres", "liters"),
    ("metres", "meters"),
    ("hectares", "acres"),
    ("knots", "leagues"),
    ("carats", "grams"),
    ("barrels", "drums"),
    ("bushels", "crates"),
    ("fathoms", "spans"),
    ("quintals", "loads"),
    ("furlongs", "lengths"),
    ("gallons", "pails"),
    ("ingots", "bars"),
    ("reams", "stacks"),
    ("cords", "bundles"),
    ("skeins", "coils"),
];

/// Wide enough that no single year dominates a cluster's token counts.
const YEARS: &[&str] = &[
    "1961", "1962", "1963", "1964", "1965", "1966", "1967", "1968", "1969", "1970", "1971",
    "1972", "1973", "1974", "1975", "1976", "1977", "1978", "1979", "1980", "1981", "1982",
    "1983", "1984", "1985", "1986", "1987", "1988", "1989", "1990",
];

/// Relation words used by documents; the second entry contradicts the
/// first. Queries never use either, they carry their own phrasing.
const RELATION_PAIRS: &[(&str, &str)] = &[
    ("reached", "missed"),
    ("exceeded", "undershot"),
    ("secured", "forfeited"),
];

/// Evidence-style source words for documents. Kept to single tokens so no
/// connective ever dominates cluster token counts.
const DOC_FRAMES: &[&str] = &[
    "archive", "ledger", "registry", "chronicle", "bulletin", "survey", "almanac", "dossier",
];

/// Claim-style openers for queries, disjoint from the document frames,
/// each word paired with its synonym twin for the perturbation.
const QUERY_FRAME_PAIRS: &[(&str, &str)] = &[
    ("analysts maintain", "experts assert"),
    ("observers contend", "witnesses claim"),
    ("reviewers conclude", "auditors determine"),
    ("correspondents state", "journalists report"),
];

struct Topic {
    signature: [String; 3],
    entities: Vec<(String, String)>,
}

struct Fact {
    topic: usize,
    entity: String,
    entity_alias: String,
    quantity_value: u32,
    unit_idx: usize,
    relation_idx: usize,
    year_idx: usize,
}

impl Fact {
    fn quantity_tokens(&self) -> (String, String) {
        (
            quantity_word(self.quantity_value),
            self.quantity_value.to_string(),
        )
    }
}

struct Generator {
    rng: ChaCha8Rng,
    topics: Vec<Topic>,
    fillers: Vec<String>,
    texts_seen: HashSet<String>,
}

impl Generator {
    fn new(cfg: &SynthConfig) -> Self {
        let mut forge = WordForge::new(cfg.seed.wrapping_mul(0x9E3779B97F4A7C15));
        let topics = (0..cfg.topics)
            .map(|_| {
                let signature = [forge.word(3), forge.word(3), forge.word(2)];
                let entities = (0..8).map(|_| (forge.word(3), forge.word(3))).collect();
                Topic {
                    signature,
                    entities,
                }
            })
            .collect();
        let fillers = (0..200).map(|_| forge.word(2)).collect();
        Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)),
            topics,
            fillers,
            texts_seen: HashSet::new(),
        }
    }

    fn filler(&mut self) -> String {
        self.fillers[self.rng.random_range(0..self.fillers.len())].clone()
    }

    fn make_fact(&mut self, topic: usize) -> Fact {
        let entity_idx = self.rng.random_range(0..self.topics[topic].entities.len());
        let (entity, alias) = self.topics[topic].entities[entity_idx].clone();
        Fact {
            topic,
            entity,
            entity_alias: alias,
            quantity_value: self.rng.random_range(100..1000),
            unit_idx: self.rng.random_range(0..UNIT_PAIRS.len()),
            relation_idx: self.rng.random_range(0..RELATION_PAIRS.len()),
            year_idx: self.rng.random_range(0..YEARS.len()),
        }
    }

    /// A supporting (or, with `contradict`, refuting) evidence sentence.
    fn doc_text(&mut self, fact: &Fact, contradict: bool) -> String {
        loop {
            let opener = self.filler();
            let tail = self.filler();
            let frame = DOC_FRAMES[self.rng.random_range(0..DOC_FRAMES.len())];
            let relation = if contradict {
                RELATION_PAIRS[fact.relation_idx].1
            } else {
                RELATION_PAIRS[fact.relation_idx].0
            };
            let sig = &self.topics[fact.topic].signature;
            let (qty_word, _) = fact.quantity_tokens();
            // The signature block appears twice: topic words dominate the
            // document the way a subject dominates a real encyclopedic
            // sentence, which is what clustering keys on.
            let text = format!(
                "{opener} {frame} {entity} {relation} {qty} {unit} {s0} {s1} {s2} {year} {s0} {s1} {s2} {tail}",
                entity = fact.entity,
                qty = qty_word,
                unit = UNIT_PAIRS[fact.unit_idx].0,
                s0 = sig[0],
                s1 = sig[1],
                s2 = sig[2],
                year = YEARS[fact.year_idx],
            );
            if self.texts_seen.insert(text.clone()) {
                return text;
            }
        }
    }

    /// The claim sentence for a queried fact. Claims carry no year token:
    /// the fact is pinned by entity, quantity and unit.
    fn query_text(&mut self, fact: &Fact) -> String {
        let frame = QUERY_FRAME_PAIRS[self.rng.random_range(0..QUERY_FRAME_PAIRS.len())].0;
        let sig = &self.topics[fact.topic].signature;
        let (qty_word, _) = fact.quantity_tokens();
        format!(
            "{frame} {entity} recorded {qty} {unit} {s0} {s1} {s2}",
            frame = frame,
            entity = fact.entity,
            qty = qty_word,
            unit = UNIT_PAIRS[fact.unit_idx].0,
            s0 = sig[0],
            s1 = sig[1],
            s2 = sig[2],
        )
    }

    /// Pure background noise: filler words only, no topic signature.
    fn filler_text(&mut self) -> String {
        loop {
            let n = self.rng.random_range(8..=12);
            let words: Vec<String> = (0..n).map(|_| self.filler()).collect();
            let text = words.join(" ");
            if self.texts_seen.insert(text.clone()) {
                return text;
            }
        }
    }

    /// A document that shares a query's rare tokens (entity, quantity,
    /// unit, signature) without supporting it. The entity is mentioned
    /// twice, so term saturation lifts a shadow strictly above any true
    /// paraphrase under lexical scoring; hedge words vary per shadow so
    /// shadows share no phrase of their own.
    fn shadow_text(&mut self, fact: &Fact) -> String {
        loop {
            let opener = self.filler();
            let hedge = self.filler();
            let tail = self.filler();
            let relation = RELATION_PAIRS[self.rng.random_range(0..RELATION_PAIRS.len())].1;
            let sig = &self.topics[fact.topic].signature;
            let (qty_word, _) = fact.quantity_tokens();
            let text = format!(
                "{opener} {hedge} {entity} {relation} {qty} {unit} {entity} {s0} {s1} {s2} {s0} {s1} {s2} {tail}",
                entity = fact.entity,
                qty = qty_word,
                unit = UNIT_PAIRS[fact.unit_idx].0,
                s0 = sig[0],
                s1 = sig[1],
                s2 = sig[2],
            );
            if self.texts_seen.insert(text.clone()) {
                return text;
            }
        }
    }
}

/// Generates the base world: `cfg.docs` documents over `cfg.topics` topics,
/// `cfg.queries` queries with rule-defined support of `min_support..=
/// max_support` documents each, plus one or two contradictory
/// near-duplicates per queried fact.
pub fn generate(cfg: &SynthConfig) -> SynthWorld {
    assert!(cfg.topics > 0 && cfg.queries > 0, "need topics and queries");
    assert!(
        cfg.min_support >= 1 && cfg.min_support <= cfg.max_support,
        "support range is empty"
    );
    let mut generator = Generator::new(cfg);
    let mut documents: Vec<Document> = Vec::with_capacity(cfg.docs);
    let mut queries: Vec<Query> = Vec::with_capacity(cfg.queries);
    let mut facts: Vec<FactRule> = Vec::with_capacity(cfg.queries);

    let push_doc = |documents: &mut Vec<Document>, text: String| -> String {
        let id = format!("d{:05}", documents.len());
        documents.push(Document::new(id.clone(), text));
        id
    };

    for q in 0..cfg.queries {
        let topic = q % cfg.topics;
        let fact = generator.make_fact(topic);
        let support_n = generator
            .rng
            .random_range(cfg.min_support..=cfg.max_support);
        let contradiction_n = generator.rng.random_range(1..=2);
        let mut supportive_ids = Vec::with_capacity(support_n);
        for _ in 0..support_n {
            let text = generator.doc_text(&fact, false);
            supportive_ids.push(push_doc(&mut documents, text));
        }
        for _ in 0..contradiction_n {
            let text = generator.doc_text(&fact, true);
            push_doc(&mut documents, text);
        }
        let query_text = generator.query_text(&fact);
        queries.push(Query {
            id: format!("q{q:03}"),
            text: query_text.clone(),
            answer: None,
            gold_ids: supportive_ids.clone(),
        });
        facts.push(FactRule {
            query_texts: vec![query_text],
            supportive_ids,
        });
    }
    assert!(
        documents.len() <= cfg.docs,
        "cfg.docs = {} cannot hold the {} queried-fact documents; raise docs or lower queries",
        cfg.docs,
        documents.len()
    );

    // Fill the remaining budget with unqueried facts, round-robin over
    // topics so every topic keeps its signature population.
    let mut topic_cursor = 0usize;
    while documents.len() < cfg.docs {
        let fact = generator.make_fact(topic_cursor % cfg.topics);
        topic_cursor += 1;
        let n = generator
            .rng
            .random_range(1..=3)
            .min(cfg.docs - documents.len());
        for _ in 0..n {
            let text = generator.doc_text(&fact, false);
            push_doc(&mut documents, text);
        }
    }

    // Shuffle so corpus order carries no information; score ties in the
    // lexical baselines must not accidentally favor gold documents.
    documents.shuffle(&mut generator.rng);

    SynthWorld {
        corpus: Corpus::from_documents(documents).expect("synthetic corpus is well-formed"),
        queries,
        rules: OracleRules { facts },
    }
}

/// Grows the corpus to `target_docs` with distractors: `shadows_per_query`
/// query-shadow documents for each query (lexically near the query, never
/// supportive) and inert filler for the rest. Queries and the rule table
/// are unchanged; distractors are unsupportive by omission.
pub fn pad_with_distractors(
    world: &SynthWorld,
    cfg: &SynthConfig,
    target_docs: usize,
    shadows_per_query: usize,
    seed: u64,
) -> SynthWorld {
    assert!(
        target_docs >= world.corpus.len(),
        "target {target_docs} below current corpus of {}",
        world.corpus.len()
    );
    // Rebuild the generator so shadows reuse the exact topic vocabulary,
    // with the sentence RNG reseeded from the padding seed.
    let mut generator = Generator::new(cfg);
    for doc in world.corpus.documents() {
        generator.texts_seen.insert(doc.text.clone());
    }
    generator.rng = ChaCha8Rng::seed_from_u64(seed);

    let mut documents = world.corpus.documents().to_vec();
    let mut next_id = documents.len();
    let mut push = |documents: &mut Vec<Document>, text: String| {
        documents.push(Document::new(format!("x{next_id:05}"), text));
        next_id += 1;
    };

    // Re-derive each queried fact's tokens by parsing its query text; the
    // generator's vocabulary is positional, so rebuild facts per query from
    // the rule table instead of re-rolling RNG state.
    for (q, query) in world.queries.iter().enumerate() {
        if documents.len() >= target_docs {
            break;
        }
        let fact = fact_from_query_text(&query.text, q % cfg.topics, &generator.topics)
            .expect("query text parses back into a fact");
        for _ in 0..shadows_per_query.min(target_docs - documents.len()) {
            let text = generator.shadow_text(&fact);
            push(&mut documents, text);
        }
    }
    while documents.len() < target_docs {
        let text = generator.filler_text();
        push(&mut documents, text);
    }

    SynthWorld {
        corpus: Corpus::from_documents(documents).expect("padded corpus is well-formed"),
        queries: world.queries.clone(),
        rules: world.rules.clone(),
    }
}

/// Reads the fact tokens back out of a generated query text.
fn fact_from_query_text(text: &str, topic_hint: usize, topics: &[Topic]) -> Option<Fact> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    // Shape: <frame x2> <entity> recorded <qty> <unit> <s0> <s1> <s2>
    let recorded_at = tokens.iter().position(|t| *t == "recorded")?;
    let entity = tokens.get(recorded_at.checked_sub(1)?)?.to_string();
    let qty_word = tokens.get(recorded_at + 1)?;
    let unit = tokens.get(recorded_at + 2)?;
    let unit_idx = UNIT_PAIRS.iter().position(|(u, _)| u == unit)?;
    let topic = topics
        .get(topic_hint)
        .filter(|t| text.contains(&t.signature[0]))
        .map(|_| topic_hint)
        .or_else(|| topics.iter().position(|t| text.contains(&t.signature[0])))?;
    let entity_alias = topics[topic]
        .entities
        .iter()
        .find(|(e, _)| *e == entity)
        .map(|(_, a)| a.clone())
        .unwrap_or_else(|| entity.clone());
    let quantity_value = parse_quantity_word(qty_word)?;
    Some(Fact {
        topic,
        entity,
        entity_alias,
        quantity_value,
        unit_idx,
        relation_idx: 0,
        year_idx: 0,
    })
}

fn parse_quantity_word(word: &str) -> Option<u32> {
    const DIGIT_SYLLABLES: [&str; 10] =
        ["zo", "un", "du", "tri", "qua", "pen", "hex", "sep", "oc", "non"];
    let mut rest = word;
    let mut value = 0u32;
    while !rest.is_empty() {
        let mut matched = false;
        // Longer syllables first so "tri" is not read as "t"+"ri".
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by_key(|&d| std::cmp::Reverse(DIGIT_SYLLABLES[d].len()));
        for d in order {
            if let Some(tail) = rest.strip_prefix(DIGIT_SYLLABLES[d]) {
                value = value * 10 + d as u32;
                rest = tail;
                matched = true;
                break;
            }
        }
        if !matched {
            return None;
        }
    }
    Some(value)
}

/// Rewrites every query with its synonym-twin surface: entity, quantity,
/// unit and claim-frame words swap to their twins and the token order is
/// shuffled; topic signature words and the year stay. The rule table is
/// extended so the oracle recognizes both surfaces.
pub fn perturbed(world: &SynthWorld, cfg: &SynthConfig, seed: u64) -> SynthWorld {
    let generator = Generator::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(world.queries.len());
    let mut rules = world.rules.clone();
    for (q, query) in world.queries.iter().enumerate() {
        let fact = fact_from_query_text(&query.text, q % cfg.topics, &generator.topics)
            .expect("query text parses back into a fact");
        let (qty_word, qty_digits) = fact.quantity_tokens();
        let frame_pair = QUERY_FRAME_PAIRS
            .iter()
            .find(|(original, _)| query.text.starts_with(original))
            .unwrap_or(&QUERY_FRAME_PAIRS[0]);
        let mut tokens: Vec<String> = query
            .text
            .split_whitespace()
            .map(|t| {
                if t == fact.entity {
                    fact.entity_alias.clone()
                } else if t == qty_word {
                    qty_digits.clone()
                } else if t == UNIT_PAIRS[fact.unit_idx].0 {
                    UNIT_PAIRS[fact.unit_idx].1.to_string()
                } else if t == "recorded" {
                    "registered".to_string()
                } else {
                    t.to_string()
                }
            })
            .collect();
        // Swap the two frame words for their twins.
        let twins: Vec<&str> = frame_pair.1.split_whitespace().collect();
        for (i, original) in frame_pair.0.split_whitespace().enumerate() {
            if let Some(slot) = tokens.iter().position(|t| t == original) {
                tokens[slot] = twins[i].to_string();
            }
        }
        tokens.shuffle(&mut rng);
        let text = tokens.join(" ");
        rules.facts[q].query_texts.push(text.clone());
        queries.push(Query {
            text,
            ..query.clone()
        });
    }
    SynthWorld {
        corpus: world.corpus.clone(),
        queries,
        rules,
    }
}
