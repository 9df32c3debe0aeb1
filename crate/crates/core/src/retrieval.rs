//! BM25 search over an in-memory inverted index, and the gold-document
//! perturbation that turns a fully supported case into a document-scarce one.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ensure_unique, Document};

const INDEX_MAGIC: &[u8; 8] = b"CFSNDX\0\x01";
const INDEX_VERSION: u32 = 1;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Distinct query terms in first-occurrence order.
pub fn query_terms(query: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    tokenize(query).into_iter().filter(|t| seen.insert(t.clone())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn idf(n_docs: usize, doc_freq: usize) -> f64 {
        let (n, df) = (n_docs as f64, doc_freq as f64);
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    pub fn term_weight(&self, tf: f64, doc_len: f64, avg_doc_len: f64) -> f64 {
        tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * doc_len / avg_doc_len))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable searchable corpus. Title and body are indexed together.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    postings: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    params: Bm25Params,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit<'a> {
    pub document: &'a Document,
    pub score: f64,
}

fn indexed_text(doc: &Document) -> String {
    format!("{} {}", doc.title, doc.body)
}

impl Corpus {
    pub fn ingest(documents: Vec<Document>) -> Result<Self> {
        Self::ingest_with(documents, Bm25Params::default())
    }

    pub fn ingest_with(documents: Vec<Document>, params: Bm25Params) -> Result<Self> {
        ensure_unique(documents.iter().map(|d| d.doc_id.as_str()))?;
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(documents.len());
        for (ordinal, doc) in documents.iter().enumerate() {
            let tokens = tokenize(&indexed_text(doc));
            if tokens.is_empty() {
                return Err(Error::Parameter(format!("document `{}` has no indexable tokens", doc.doc_id)));
            }
            doc_lengths.push(tokens.len() as u32);
            let mut counts: HashMap<String, u32> = HashMap::new();
            for token in tokens {
                *counts.entry(token).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting { doc: ordinal as u32, tf });
            }
        }
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64
        };
        Ok(Corpus {
            documents,
            postings,
            doc_lengths,
            avg_doc_length,
            params,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Top-`k` documents by BM25 score. Documents sharing no term with the
    /// query never appear; equal scores are ordered by ascending `doc_id`.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<Hit<'_>>> {
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        if self.is_empty() {
            return Err(Error::Parameter("cannot search an empty corpus".into()));
        }
        let n = self.documents.len();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in query_terms(query) {
            let postings = self.postings(&term);
            if postings.is_empty() {
                continue;
            }
            let idf = Bm25Params::idf(n, postings.len());
            for p in postings {
                let dl = self.doc_lengths[p.doc as usize] as f64;
                *scores.entry(p.doc).or_insert(0.0) +=
                    idf * self.params.term_weight(p.tf as f64, dl, self.avg_doc_length);
            }
        }
        let mut hits: Vec<Hit<'_>> = scores
            .into_iter()
            .map(|(doc, score)| Hit {
                document: &self.documents[doc as usize],
                score,
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.document.doc_id.cmp(&b.document.doc_id))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// Writes the versioned binary index file.
    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Payload<'a> {
            params: Bm25Params,
            documents: &'a [Document],
        }
        let payload = serde_json::to_vec(&Payload {
            params: self.params,
            documents: &self.documents,
        })
        .map_err(|e| Error::IndexFormat(e.to_string()))?;
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::with_capacity(payload.len() + 20);
        bytes.extend_from_slice(INDEX_MAGIC);
        bytes.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&payload);
        file.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Payload {
            params: Bm25Params,
            documents: Vec<Document>,
        }
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 20 || &bytes[..8] != INDEX_MAGIC {
            return Err(Error::IndexFormat(format!("{} is not an index file", path.display())));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != INDEX_VERSION {
            return Err(Error::IndexFormat(format!("unsupported index version {version}")));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(20..20 + len)
            .ok_or_else(|| Error::IndexFormat("truncated index file".into()))?;
        let payload: Payload = serde_json::from_slice(body).map_err(|e| Error::IndexFormat(e.to_string()))?;
        Corpus::ingest_with(payload.documents, payload.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPolicy {
    pub drop_probability: f64,
    pub target_size: usize,
    pub seed: u64,
}

impl Default for PerturbationPolicy {
    fn default() -> Self {
        PerturbationPolicy {
            drop_probability: 0.5,
            target_size: 5,
            seed: 0,
        }
    }
}

impl PerturbationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.drop_probability > 0.0 && self.drop_probability <= 1.0) {
            return Err(Error::Parameter(format!(
                "drop_probability {} outside (0, 1]",
                self.drop_probability
            )));
        }
        if self.target_size == 0 {
            return Err(Error::Parameter("target_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub documents: Vec<Document>,
    pub dropped: Vec<String>,
    /// Fewer than `target_size` documents were available.
    pub underfilled: bool,
}

/// Drops gold documents at random (at least one), then pads with the best
/// search hits for `query` that are neither kept nor dropped gold documents.
pub fn perturb_documents(
    gold: &[Document],
    corpus: &Corpus,
    query: &str,
    policy: &PerturbationPolicy,
) -> Result<Perturbation> {
    policy.validate()?;
    if gold.is_empty() {
        return Err(Error::Parameter("gold documents must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut drop: Vec<bool> = gold.iter().map(|_| rng.gen_bool(policy.drop_probability)).collect();
    if !drop.iter().any(|&d| d) {
        let forced = (0..gold.len()).collect::<Vec<_>>();
        drop[*forced.choose(&mut rng).expect("gold is non-empty")] = true;
    }

    let mut taken: HashSet<&str> = HashSet::new();
    let mut documents = Vec::with_capacity(policy.target_size);
    let mut dropped = Vec::new();
    for (doc, &is_dropped) in gold.iter().zip(&drop) {
        if is_dropped {
            dropped.push(doc.doc_id.clone());
        } else if taken.insert(doc.doc_id.as_str()) {
            documents.push(doc.clone());
        }
    }
    let excluded: HashSet<&str> = dropped.iter().map(String::as_str).collect();
    documents.truncate(policy.target_size);

    if documents.len() < policy.target_size && !corpus.is_empty() {
        for hit in corpus.search(query, corpus.len())? {
            if documents.len() == policy.target_size {
                break;
            }
            let id = hit.document.doc_id.as_str();
            if excluded.contains(id) || taken.contains(id) {
                continue;
            }
            taken.insert(id);
            documents.push(Document {
                is_gold: false,
                ..hit.document.clone()
            });
        }
    }
    let underfilled = documents.len() < policy.target_size;
    Ok(Perturbation {
        documents,
        dropped,
        underfilled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, body: &str) -> Document {
        Document::new(id, "", body, false)
    }

    fn small_corpus() -> Corpus {
        Corpus::ingest(vec![doc("d1", "yoga london"), doc("d2", "tax law"), doc("d3", "cats")]).unwrap()
    }

    #[test]
    fn ingest_counts_lengths() {
        let c = small_corpus();
        assert_eq!(c.doc_lengths(), &[2, 2, 1]);
        assert!((c.avg_doc_length() - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tokenizer_contract() {
        let c = Corpus::ingest(vec![doc("x", "A a a.")]).unwrap();
        assert_eq!(c.postings("a"), &[Posting { doc: 0, tf: 3 }]);
        assert_eq!(tokenize("New-York's  best!"), vec!["new", "york", "s", "best"]);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = Corpus::ingest(vec![doc("x", "a"), doc("x", "b")]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "x"));
    }

    #[test]
    fn single_match() {
        let c = small_corpus();
        let hits = c.search("yoga", 2).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].document.doc_id, "d1");
    }

    #[test]
    fn no_overlap_is_empty() {
        assert!(small_corpus().search("quantum", 2).unwrap().is_empty());
    }

    #[test]
    fn zero_k_is_rejected() {
        assert!(matches!(small_corpus().search("yoga", 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn equal_scores_order_by_id() {
        let c = Corpus::ingest(vec![doc("b", "same words"), doc("a", "same words"), doc("c", "other")]).unwrap();
        let ids: Vec<&str> = c.search("same", 3).unwrap().iter().map(|h| h.document.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn index_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bin");
        let c = small_corpus();
        c.save(&path).unwrap();
        let loaded = Corpus::load(&path).unwrap();
        assert_eq!(loaded.documents(), c.documents());
        assert_eq!(loaded.search("tax", 1).unwrap()[0].score, c.search("tax", 1).unwrap()[0].score);

        std::fs::write(&path, b"not an index at all").unwrap();
        assert!(matches!(Corpus::load(&path), Err(Error::IndexFormat(_))));
    }

    fn gold() -> Vec<Document> {
        vec![
            Document::new("g1", "", "Edward F. Cline is a screenwriter", true),
            Document::new("g2", "", "Floyd Mutrux is a screenwriter", true),
        ]
    }

    fn noise_corpus() -> Corpus {
        let mut docs = gold();
        for i in 0..6 {
            docs.push(doc(&format!("n{i}"), &format!("screenwriter biography number {i}")));
        }
        Corpus::ingest(docs).unwrap()
    }

    #[test]
    fn certain_drop_removes_every_gold_doc() {
        let policy = PerturbationPolicy { drop_probability: 1.0, target_size: 4, seed: 3 };
        let out = perturb_documents(&gold(), &noise_corpus(), "screenwriter", &policy).unwrap();
        assert!(out.documents.iter().all(|d| !d.doc_id.starts_with('g')));
        assert!(out.documents.len() <= 4);
        assert_eq!(out.dropped.len(), 2);
    }

    #[test]
    fn tiny_drop_probability_forces_exactly_one() {
        for seed in 0..20 {
            let policy = PerturbationPolicy { drop_probability: 1e-12, target_size: 4, seed };
            let out = perturb_documents(&gold(), &noise_corpus(), "screenwriter", &policy).unwrap();
            assert_eq!(out.dropped.len(), 1);
            let gold_kept = out.documents.iter().filter(|d| d.doc_id.starts_with('g')).count();
            assert_eq!(gold_kept, 1);
        }
    }

    #[test]
    fn seeded_determinism() {
        let policy = PerturbationPolicy { drop_probability: 0.5, target_size: 4, seed: 42 };
        let a = perturb_documents(&gold(), &noise_corpus(), "screenwriter", &policy).unwrap();
        let b = perturb_documents(&gold(), &noise_corpus(), "screenwriter", &policy).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_corpus_is_underfilled() {
        let policy = PerturbationPolicy { drop_probability: 1.0, target_size: 10, seed: 1 };
        let out = perturb_documents(&gold(), &noise_corpus(), "screenwriter", &policy).unwrap();
        assert!(out.underfilled);
        assert_eq!(out.documents.len(), 6);
    }

    #[test]
    fn invalid_policies() {
        let c = noise_corpus();
        for policy in [
            PerturbationPolicy { drop_probability: 0.0, ..Default::default() },
            PerturbationPolicy { drop_probability: 1.5, ..Default::default() },
            PerturbationPolicy { target_size: 0, ..Default::default() },
        ] {
            assert!(perturb_documents(&gold(), &c, "q", &policy).is_err());
        }
        assert!(perturb_documents(&[], &c, "q", &PerturbationPolicy::default()).is_err());
    }

    proptest! {
        #[test]
        fn perturbation_invariants(
            p in 0.01f64..=1.0,
            target in 1usize..8,
            seed in any::<u64>(),
            n_gold in 1usize..5,
        ) {
            let gold: Vec<Document> = (0..n_gold)
                .map(|i| Document::new(format!("g{i}"), "", format!("gold fact {i} screenwriter"), true))
                .collect();
            let mut docs = gold.clone();
            docs.extend((0..5).map(|i| doc(&format!("n{i}"), &format!("noise screenwriter {i}"))));
            let corpus = Corpus::ingest(docs).unwrap();
            let policy = PerturbationPolicy { drop_probability: p, target_size: target, seed };
            let out = perturb_documents(&gold, &corpus, "screenwriter fact", &policy).unwrap();
            prop_assert!(out.documents.len() <= target);
            let ids: HashSet<&str> = out.documents.iter().map(|d| d.doc_id.as_str()).collect();
            prop_assert_eq!(ids.len(), out.documents.len());
            prop_assert!(gold.iter().any(|g| !ids.contains(g.doc_id.as_str())));
        }

        #[test]
        fn scores_are_positive_and_finite(words in proptest::collection::vec("[a-e]{1,2}", 1..6)) {
            let corpus = Corpus::ingest(vec![
                doc("1", "a b c"), doc("2", "a a d"), doc("3", "e e e b"), doc("4", "cc dd"),
            ]).unwrap();
            let query = words.join(" ");
            let terms: HashSet<String> = query_terms(&query).into_iter().collect();
            for hit in corpus.search(&query, 10).unwrap() {
                prop_assert!(hit.score.is_finite() && hit.score > 0.0);
                prop_assert!(tokenize(&hit.document.body).iter().any(|t| terms.contains(t)));
            }
        }
    }
}
