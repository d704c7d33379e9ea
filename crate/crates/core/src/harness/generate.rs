use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Lexicons;
use crate::domain::{timestamp, Claim, ContentKind, Document, MisinfoLabel};
use crate::extractor::RoutingTable;
use crate::indexer::{Index, IndexConfig, IndexError, ReputationEntry, ReputationTable, SourceCategory};
use crate::text::tokenize;

use super::{ClaimAnswer, GroundTruth, HarnessError, PropagationSpec};

const BUILTIN_TEMPLATES: &str = include_str!("../../data/templates.json");

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const TOPIC_WORDS: usize = 3 + FILLER_SENTENCES * FILLER_LEN;
const FILLER_SENTENCES: usize = 3;
const FILLER_LEN: usize = 8;

const MISINFO_DOMAINS: [&str; 6] = [
    "dailyrumor.example.net",
    "truthleaks.example.info",
    "viralnow.example.net",
    "patriotpost.example.info",
    "clickfeed.example.net",
    "shockwire.example.info",
];

fn truth_domains(category: SourceCategory) -> [&'static str; 3] {
    match category {
        SourceCategory::Statistics => ["statbureau.example.gov", "census.example.gov", "datadesk.example.org"],
        SourceCategory::Government => ["ministry.example.gov", "parliament.example.gov", "registry.example.gov"],
        SourceCategory::History => ["archive.example.edu", "chronicle.example.edu", "museum.example.org"],
        SourceCategory::Science => ["labjournal.example.org", "academy.example.edu", "observatory.example.org"],
        SourceCategory::Factcheck => ["factdesk.example.org", "verifyhub.example.org", "claimcheck.example.org"],
        SourceCategory::News | SourceCategory::Other => {
            ["wirenews.example.com", "dailyledger.example.com", "pressroom.example.com"]
        }
    }
}

/// Sentence templates with `{a}`, `{b}`, `{c}` (topic words), `{n}` and
/// `{year}` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Templates {
    pub assertions: BTreeMap<MisinfoLabel, Vec<String>>,
    pub rebuttals: Vec<String>,
}

impl Templates {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_TEMPLATES).expect("shipped templates are valid")
    }

    pub fn from_json(raw: &str) -> Result<Self, HarnessError> {
        let t: Self = serde_json::from_str(raw).map_err(|e| HarnessError::Templates(e.to_string()))?;
        if t.rebuttals.is_empty() {
            return Err(HarnessError::Templates("no rebuttal templates".into()));
        }
        Ok(t)
    }
}

/// A pronounceable word of three consonant-vowel syllables.
pub fn pseudo_word<R: Rng>(rng: &mut R) -> String {
    let mut w = String::with_capacity(6);
    for _ in 0..3 {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

struct Gen {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Gen {
    fn fresh_word(&mut self) -> String {
        loop {
            let w = pseudo_word(&mut self.rng);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn uuid(&mut self) -> String {
        let mut bytes = [0u8; 16];
        self.rng.fill_bytes(&mut bytes);
        uuid::Builder::from_random_bytes(bytes).into_uuid().to_string()
    }

    fn fill(&mut self, template: &str, topic: &[String]) -> String {
        let n = self.rng.gen_range(2..100).to_string();
        let year = self.rng.gen_range(1700..1950).to_string();
        template
            .replace("{a}", &topic[0])
            .replace("{b}", &topic[1])
            .replace("{c}", &topic[2])
            .replace("{n}", &n)
            .replace("{year}", &year)
    }

    /// Sentences of distinct words drawn from `words`.
    fn filler(&mut self, words: &[String], sentences: usize) -> String {
        let picked: Vec<&String> = words.choose_multiple(&mut self.rng, sentences * FILLER_LEN).collect();
        picked
            .chunks(FILLER_LEN)
            .map(|s| {
                let mut out = capitalize(s[0]);
                for w in &s[1..] {
                    out.push(' ');
                    out.push_str(w);
                }
                out.push('.');
                out
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Replaces each whitespace token with probability `rate`, keeping
    /// trailing punctuation.
    fn mutate(&mut self, body: &str, rate: f64) -> String {
        if rate <= 0.0 {
            return body.to_string();
        }
        let tokens: Vec<String> = body
            .split_whitespace()
            .map(|tok| {
                if self.rng.gen_bool(rate) {
                    let tail: String = tok.chars().skip_while(|c| c.is_alphanumeric()).collect();
                    format!("{}{}", self.fresh_word(), tail)
                } else {
                    tok.to_string()
                }
            })
            .collect();
        tokens.join(" ")
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn title_of(body: &str) -> String {
    body.split_whitespace().take(6).collect::<Vec<_>>().join(" ")
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

/// Rebuttals for a label come from its most boosted routing category.
fn rebuttal_category(label: MisinfoLabel) -> SourceCategory {
    RoutingTable::default()
        .boosts(label)
        .into_iter()
        .fold(None, |best: Option<(SourceCategory, f64)>, (c, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((c, w)),
        })
        .map_or(SourceCategory::News, |(c, _)| c)
}

/// Everything a run of the harness produces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub spec: PropagationSpec,
    pub documents: Vec<Document>,
    pub claims: Vec<Claim>,
    pub truth: GroundTruth,
    pub reputation: ReputationTable,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

impl GeneratedCorpus {
    pub fn corpus_jsonl(&self) -> String {
        jsonl(&self.documents)
    }

    pub fn claims_jsonl(&self) -> String {
        jsonl(&self.claims)
    }

    /// Writes `corpus.jsonl`, `claims.jsonl`, `ground_truth.json`,
    /// `reputation.json`, the stance mock script and a `config.json` that
    /// wires them.
    pub fn write_dir(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, body: &str| -> std::io::Result<()> {
            let mut f = std::fs::File::create(dir.join(name))?;
            f.write_all(body.as_bytes())
        };
        write("corpus.jsonl", &self.corpus_jsonl())?;
        write("claims.jsonl", &self.claims_jsonl())?;
        write("ground_truth.json", &serde_json::to_string_pretty(&self.truth).expect("serializable"))?;
        write("reputation.json", &serde_json::to_string_pretty(&self.reputation).expect("serializable"))?;
        write("stance_mock.json", super::STANCE_SCRIPT)?;
        write("config.json", &serde_json::to_string_pretty(&self.mock_config()).expect("serializable"))?;
        Ok(())
    }

    /// Config wiring the files from [`GeneratedCorpus::write_dir`] the way
    /// [`super::mock_orchestrator`] wires them in memory.
    pub fn mock_config(&self) -> serde_json::Value {
        let now = self.claims.iter().map(|c| c.received_at).max().unwrap_or_default();
        serde_json::json!({
            "index": { "reputation_file": "reputation.json" },
            "backends": {
                "stance": { "kind": "scripted_mock", "script_file": "stance_mock.json", "default_response": "neutral" }
            },
            "corrector": { "stance_backend": "stance" },
            "pipeline": { "fixed_clock": timestamp::render(&now) }
        })
    }

    /// An index holding every generated document, with the generated
    /// reputation table installed.
    pub fn build_index(&self, config: IndexConfig) -> Result<Index, IndexError> {
        let mut index = Index::new(config)?;
        index.set_reputation_table(self.reputation.clone());
        for doc in &self.documents {
            index.add(doc.clone())?;
        }
        Ok(index)
    }
}

/// Generates propagation trees of misinformation, rebuttals from reputable
/// domains, and one claim per tree restating the opening of the tree's root
/// with one word changed.
///
/// Every tree draws one label from the label mix. Documents attach to a
/// uniformly chosen earlier document of the same tree and copy its body
/// with per-token mutations.
pub fn generate_corpus(spec: &PropagationSpec, templates: &Templates) -> Result<GeneratedCorpus, HarnessError> {
    spec.validate()?;
    let mix = spec.effective_mix();
    let labels: Vec<MisinfoLabel> = mix.keys().copied().collect();
    for l in &labels {
        if mix[l] > 0.0 && templates.assertions.get(l).is_none_or(Vec::is_empty) {
            return Err(HarnessError::Templates(format!("no assertion template for {l}")));
        }
    }
    let picker = WeightedIndex::new(labels.iter().map(|l| mix[l]))
        .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;

    let keywords: HashSet<String> = Lexicons::builtin().all_tokens().collect();
    let reserved: HashSet<String> = keywords
        .iter()
        .cloned()
        .chain(templates.assertions.values().flatten().chain(&templates.rebuttals).flat_map(|t| tokenize(t)))
        .collect();
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(spec.seed), used: reserved.clone() };

    let mut reputation = ReputationTable::new();
    for d in MISINFO_DOMAINS {
        let rep = 0.1 + 0.2 * g.rng.gen::<f64>();
        reputation.insert(d, rep, SourceCategory::Other);
    }

    let step = Duration::hours(spec.time_step_hours);
    let mut documents = Vec::new();
    let mut claims = Vec::new();
    let mut truth = GroundTruth::default();

    for tree in 0..spec.n_trees {
        let label = labels[picker.sample(&mut g.rng)];
        let topic: Vec<String> = (0..TOPIC_WORDS).map(|_| g.fresh_word()).collect();
        let options = &templates.assertions[&label];
        let pick = g.rng.gen_range(0..options.len());
        let assertion = g.fill(&options[pick], &topic);

        let lead = g.filler(&topic[3..], 1);
        let rest = g.filler(&topic[3..], FILLER_SENTENCES - 1);
        let body = format!("{assertion} {lead} {rest}");

        let start = base_time() + Duration::hours(g.rng.gen_range(0..24 * 30)) + Duration::days(tree as i64);
        let mut tree_docs: Vec<(String, DateTime<Utc>, String)> = Vec::with_capacity(spec.docs_per_tree);
        for i in 0..spec.docs_per_tree {
            let (doc_body, published_at, parent) = if i == 0 {
                (body.clone(), start, None)
            } else {
                let p = g.rng.gen_range(0..i);
                let (pid, ptime, pbody) = &tree_docs[p];
                let copied = g.mutate(pbody, spec.mutation_rate);
                (copied, *ptime + step, Some(pid.clone()))
            };
            let id = g.uuid();
            let domain = MISINFO_DOMAINS[g.rng.gen_range(0..MISINFO_DOMAINS.len())];
            documents.push(Document {
                id: id.clone(),
                url: format!("https://{domain}/posts/{id}"),
                domain: domain.to_string(),
                title: title_of(&doc_body),
                author: None,
                published_at,
                modified_at: None,
                body: doc_body.clone(),
                content_kind: ContentKind::Plain,
            });
            truth.doc_labels.insert(id.clone(), label);
            truth.trees.insert(id.clone(), parent.unwrap_or_else(|| id.clone()));
            tree_docs.push((id, published_at, doc_body));
        }
        let root_id = tree_docs[0].0.clone();
        let last = tree_docs.iter().map(|d| d.1).max().expect("non-empty tree");

        let category = rebuttal_category(label);
        let pool = truth_domains(category);
        let first = g.rng.gen_range(0..pool.len());
        for j in 0..spec.truth_docs_per_tree {
            let domain = pool[(first + j) % pool.len()];
            if reputation.lookup(domain).is_none() {
                let entry = ReputationEntry {
                    reputation: 0.9 + 0.05 * g.rng.gen::<f64>(),
                    category,
                    citations: 40,
                };
                reputation.insert_entry(domain, entry);
            }
            let rebuttal = &templates.rebuttals[g.rng.gen_range(0..templates.rebuttals.len())];
            let doc_body = format!("{} {}", g.fill(rebuttal, &topic), g.filler(&topic[3..], 1));
            let id = g.uuid();
            documents.push(Document {
                id: id.clone(),
                url: format!("https://{domain}/records/{id}"),
                domain: domain.to_string(),
                title: title_of(&doc_body),
                author: None,
                published_at: last + step * (j as i32 + 1),
                modified_at: None,
                body: doc_body,
                content_kind: ContentKind::Plain,
            });
            truth.doc_labels.insert(id.clone(), MisinfoLabel::NotMisinformation);
            truth.trees.insert(id.clone(), id);
        }

        let claim_text = format!("{} {lead}", paraphrase(&mut g, &assertion, &keywords, &topic));
        let claim_id = g.uuid();
        let received_at = last + step * (spec.truth_docs_per_tree as i32 + 1) + Duration::hours(24);
        claims.push(Claim::new(claim_id.clone(), claim_text, received_at));
        truth.claim_answers.insert(claim_id, ClaimAnswer { label, origin_doc: root_id });
    }

    Ok(GeneratedCorpus { spec: spec.clone(), documents, claims, truth, reputation })
}

/// The assertion with exactly one word swapped for a fresh one. Keywords
/// and topic words stay intact.
fn paraphrase(g: &mut Gen, assertion: &str, keywords: &HashSet<String>, topic: &[String]) -> String {
    let mut tokens: Vec<String> = assertion.split_whitespace().map(String::from).collect();
    let candidates: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let toks = tokenize(t);
            toks.len() == 1
                && toks[0].chars().all(|c| c.is_ascii_lowercase())
                && !keywords.contains(&toks[0])
                && !topic.contains(&toks[0])
        })
        .map(|(i, _)| i)
        .collect();
    if let Some(&i) = candidates.choose(&mut g.rng) {
        let tail: String = tokens[i].chars().skip_while(|c| c.is_alphanumeric()).collect();
        tokens[i] = format!("{}{}", g.fresh_word(), tail);
    }
    tokens.join(" ")
}
