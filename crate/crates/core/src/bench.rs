//! Benchmark construction: labeling raw cases as capability or document
//! cases, AMR-based query obscuring with validation, gold inquiries, and
//! quota-based assembly of the benchmark/training split.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amr::AmrGraph;
use crate::error::{Error, Result};
use crate::evaluator::score_answer;
use crate::gateway::{value_text, Gateway, Message, ModelRef, SamplingParams};
use crate::model::{Case, Dataset, Document, Split, UncertaintySource};
use crate::prompts;
use crate::retrieval::{perturb_documents, Corpus, PerturbationPolicy};
use crate::text::normalize;

/// Answer samples per query inside the obscurity check.
pub const OBSCURITY_SAMPLES: usize = 3;

/// A source record before labeling. AmbigQA-style records may carry a
/// native ambiguous query with its clarification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCase {
    pub id: String,
    pub dataset: Dataset,
    pub query: String,
    pub gold_documents: Vec<Document>,
    pub gold_answer: String,
    #[serde(default)]
    pub ambiguous_query: Option<String>,
    #[serde(default)]
    pub clarification: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Labeled(Case),
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguationResult {
    pub amr: String,
    pub obscured_query: String,
    pub clarification: String,
    pub thinking: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Obscurity {
    Success,
    Failure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldInquiry {
    pub inquiry: String,
    pub missing_information: String,
}

/// Score at or above which an answer counts as correct: binary datasets
/// need a correct verdict, graded ones a usefulness of at least 3 of 4.
pub fn success_threshold(dataset: &Dataset) -> f64 {
    if dataset.is_short_answer() {
        1.0
    } else {
        2.0 / 3.0
    }
}

/// Stable 64-bit value derived from a string, for per-record seeds.
pub fn stable_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn same_query(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

pub struct Builder<'a> {
    pub gateway: &'a Gateway,
    /// Answers queries; its failures define the labels.
    pub model: &'a ModelRef,
    /// Grades answers and runs the construction prompts.
    pub judge: &'a ModelRef,
    pub corpus: &'a Corpus,
    pub policy: PerturbationPolicy,
    /// Sampling for the multi-sample answers of the obscurity check.
    pub sampling: SamplingParams,
}

impl<'a> Builder<'a> {
    pub fn new(gateway: &'a Gateway, model: &'a ModelRef, judge: &'a ModelRef, corpus: &'a Corpus, policy: PerturbationPolicy) -> Self {
        Builder {
            gateway,
            model,
            judge,
            corpus,
            policy,
            sampling: SamplingParams::judging(),
        }
    }

    fn answer(&self, dataset: &Dataset, query: &str, documents: &[Document], params: &SamplingParams) -> Result<String> {
        let prompt = prompts::answer_query(
            query,
            &prompts::render_documents(documents),
            &prompts::render_history(&[]),
            dataset.answer_token_budget(),
        );
        self.gateway.complete(self.model, &[Message::user(prompt)], params)
    }

    fn is_correct(&self, case: &Case, answer: &str) -> Result<bool> {
        Ok(score_answer(self.gateway, case, answer, self.judge)? >= success_threshold(&case.dataset))
    }

    /// Wrong with gold documents → capability; right with gold but wrong
    /// with perturbed documents → document; right on both → excluded.
    pub fn classify_raw_case(&self, raw: &RawCase) -> Result<Classification> {
        if raw.gold_answer.trim().is_empty() {
            return Err(Error::Parameter(format!("raw case `{}` has no gold answer", raw.id)));
        }
        let gold: Vec<Document> = raw
            .gold_documents
            .iter()
            .map(|d| Document { is_gold: true, ..d.clone() })
            .collect();
        let mut case = Case {
            id: raw.id.clone(),
            dataset: raw.dataset.clone(),
            original_query: raw.query.clone(),
            actual_query: raw.query.clone(),
            gold_documents: gold.clone(),
            actual_documents: gold.clone(),
            clarification: None,
            gold_answer: raw.gold_answer.clone(),
            gold_inquiry: None,
            label: None,
            split: Split::Training,
        };
        let params = SamplingParams::answering(raw.dataset.answer_token_budget());
        let with_gold = self.answer(&raw.dataset, &raw.query, &gold, &params)?;
        if !self.is_correct(&case, &with_gold)? {
            case.label = Some(UncertaintySource::Capability);
            return Ok(Classification::Labeled(case));
        }
        let policy = PerturbationPolicy {
            seed: self.policy.seed ^ stable_hash(&raw.id),
            ..self.policy
        };
        let perturbed = perturb_documents(&gold, self.corpus, &raw.query, &policy)?;
        let with_perturbed = self.answer(&raw.dataset, &raw.query, &perturbed.documents, &params)?;
        if !self.is_correct(&case, &with_perturbed)? {
            case.label = Some(UncertaintySource::Document);
            case.actual_documents = perturbed.documents;
            return Ok(Classification::Labeled(case));
        }
        Ok(Classification::Excluded)
    }

    /// Query → AMR → obscured AMR and query; the clarification is the
    /// missing information between the two queries.
    pub fn ambiguate_query(&self, query: &str, seed: u64) -> Result<AmbiguationResult> {
        if query.trim().is_empty() {
            return Err(Error::Parameter("query must be non-empty".into()));
        }
        let params = self.sampling.with_seed(seed);
        let parsed = self
            .gateway
            .complete_structured(self.judge, &[Message::user(prompts::parse_amr(query))], &params, &["AMR"])?;
        let amr = value_text(&parsed["AMR"]).trim().to_string();
        AmrGraph::parse(&amr)?;

        const OBSCURED_AMR: &str = "Obscured Abstract Meaning Representation (AMR)";
        const QUERY_KEY: &str = "Translated Text Query";
        let obscured = self.gateway.complete_structured(
            self.judge,
            &[Message::user(prompts::ambiguate_amr(query, &amr))],
            &params,
            &["step_by_step_thinking", OBSCURED_AMR, QUERY_KEY],
        )?;
        let obscured_query = value_text(&obscured[QUERY_KEY]).trim().to_string();
        if obscured_query.is_empty() || same_query(&obscured_query, query) {
            return Err(Error::DegenerateAmbiguation(obscured_query));
        }
        let diff = self.gateway.complete_structured(
            self.judge,
            &[Message::user(prompts::gold_inquiry(query, "None", &obscured_query, "None"))],
            &params,
            &["missing information", "inquiry"],
        )?;
        let clarification = value_text(&diff["missing information"]).trim().to_string();
        if clarification.is_empty() {
            return Err(Error::InvalidJudgment("empty clarification".into()));
        }
        Ok(AmbiguationResult {
            amr,
            obscured_query,
            clarification,
            thinking: value_text(&obscured["step_by_step_thinking"]),
        })
    }

    fn sample_answers(&self, dataset: &Dataset, query: &str, documents: &[Document], seed: u64) -> Result<Vec<String>> {
        (0..OBSCURITY_SAMPLES)
            .map(|i| self.answer(dataset, query, documents, &self.sampling.with_seed(seed.wrapping_add(i as u64))))
            .collect()
    }

    /// Checks that the obscured query fails while its clarified form
    /// succeeds, then asks the judge for the overall verdict.
    pub fn validate_obscurity(
        &self,
        case: &Case,
        obscured_query: &str,
        clarification: &str,
        seed: u64,
    ) -> Result<Obscurity> {
        if same_query(obscured_query, &case.original_query) {
            return Ok(Obscurity::Failure("obscured query equals the original query".into()));
        }
        if [case.original_query.as_str(), case.gold_answer.as_str(), obscured_query, clarification]
            .iter()
            .any(|t| t.trim().is_empty())
        {
            return Err(Error::Parameter("obscurity check needs non-empty texts".into()));
        }
        let docs = &case.gold_documents;
        let clarified_query = format!("{obscured_query} (Clarification: {clarification})");
        let original = self.sample_answers(&case.dataset, &case.original_query, docs, seed)?;
        let obscured = self.sample_answers(&case.dataset, obscured_query, docs, seed.wrapping_add(10))?;
        let clarified = self.sample_answers(&case.dataset, &clarified_query, docs, seed.wrapping_add(20))?;

        for answer in &obscured {
            if answer.trim() == prompts::NO_RESPONSE {
                continue;
            }
            if self.is_correct(case, answer)? {
                return Ok(Obscurity::Failure("obscured query still answerable".into()));
            }
        }
        let mut correct = 0;
        for answer in &clarified {
            if self.is_correct(case, answer)? {
                correct += 1;
            }
        }
        if correct * 2 <= clarified.len() {
            return Ok(Obscurity::Failure("clarified query is not answered correctly".into()));
        }
        let evidence = prompts::ObscurityEvidence {
            original_query: &case.original_query,
            original_answers: &prompts::render_answers(&original),
            obscured_query,
            obscured_answers: &prompts::render_answers(&obscured),
            clarified_query: &clarified_query,
            clarified_answers: &prompts::render_answers(&clarified),
        };
        let verdict = self.gateway.complete_structured(
            self.judge,
            &[Message::user(prompts::check_obscurity(&evidence))],
            &SamplingParams::answering(1024),
            &["answer"],
        )?;
        let text = value_text(&verdict["answer"]).to_ascii_lowercase();
        if text.contains("success") && !text.contains("failure") {
            Ok(Obscurity::Success)
        } else {
            Ok(Obscurity::Failure(format!("judge verdict: {}", value_text(&verdict["answer"]))))
        }
    }

    pub fn generate_gold_inquiry(&self, case: &Case) -> Result<GoldInquiry> {
        let prompt = prompts::gold_inquiry(
            &case.original_query,
            &prompts::render_documents(&case.gold_documents),
            &case.actual_query,
            &prompts::render_documents(&case.actual_documents),
        );
        let map = self.gateway.complete_structured(
            self.judge,
            &[Message::user(prompt)],
            &SamplingParams::answering(1024),
            &["missing information", "inquiry"],
        )?;
        let inquiry = value_text(&map["inquiry"]).trim().to_string();
        if inquiry.is_empty() {
            return Err(Error::InvalidJudgment("empty gold inquiry".into()));
        }
        Ok(GoldInquiry {
            inquiry,
            missing_information: value_text(&map["missing information"]).trim().to_string(),
        })
    }

    /// The ambiguity counterpart of a raw case, if obscuring succeeds.
    /// Native ambiguous queries skip obscuring but are still validated.
    pub fn ambiguity_case(&self, raw: &RawCase) -> Result<Option<Case>> {
        let gold: Vec<Document> = raw
            .gold_documents
            .iter()
            .map(|d| Document { is_gold: true, ..d.clone() })
            .collect();
        let mut case = Case {
            id: format!("{}-amb", raw.id),
            dataset: raw.dataset.clone(),
            original_query: raw.query.clone(),
            actual_query: String::new(),
            gold_documents: gold.clone(),
            actual_documents: gold,
            clarification: None,
            gold_answer: raw.gold_answer.clone(),
            gold_inquiry: None,
            label: Some(UncertaintySource::Ambiguity),
            split: Split::Training,
        };
        let base_seed = self.policy.seed ^ stable_hash(&case.id);
        let (obscured, clarification) = match (&raw.ambiguous_query, &raw.clarification) {
            (Some(q), Some(c)) if !q.trim().is_empty() && !c.trim().is_empty() => (q.clone(), c.clone()),
            _ => {
                let mut attempt = self.ambiguate_query(&raw.query, base_seed);
                if matches!(attempt, Err(Error::DegenerateAmbiguation(_))) {
                    attempt = self.ambiguate_query(&raw.query, base_seed.wrapping_add(1));
                }
                match attempt {
                    Ok(r) => (r.obscured_query, r.clarification),
                    Err(Error::DegenerateAmbiguation(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
        };
        match self.validate_obscurity(&case, &obscured, &clarification, base_seed)? {
            Obscurity::Success => {}
            Obscurity::Failure(reason) => {
                tracing::debug!(case = %case.id, %reason, "obscuring rejected");
                return Ok(None);
            }
        }
        case.actual_query = obscured;
        case.clarification = Some(clarification);
        case.gold_inquiry = Some(self.generate_gold_inquiry(&case)?.inquiry);
        Ok(Some(case))
    }

    /// Every labeled case derivable from one raw case.
    pub fn build_one(&self, raw: &RawCase) -> Result<Vec<Case>> {
        let mut out = Vec::new();
        if let Classification::Labeled(mut case) = self.classify_raw_case(raw)? {
            if case.label == Some(UncertaintySource::Document) {
                case.gold_inquiry = Some(self.generate_gold_inquiry(&case)?.inquiry);
            }
            out.push(case);
        }
        if let Some(case) = self.ambiguity_case(raw)? {
            out.push(case);
        }
        Ok(out)
    }

    /// Builds all raw cases concurrently; per-record failures are reported
    /// rather than aborting the run.
    pub fn build(&self, raws: &[RawCase]) -> BuildReport {
        let results: Vec<Result<Vec<Case>>> = raws.par_iter().map(|raw| self.build_one(raw)).collect();
        let mut report = BuildReport::default();
        for (raw, result) in raws.iter().zip(results) {
            match result {
                Ok(cases) if cases.is_empty() => report.excluded += 1,
                Ok(cases) => report.cases.extend(cases),
                Err(e) => report.failures.push((raw.id.clone(), e.to_string())),
            }
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    pub cases: Vec<Case>,
    pub excluded: usize,
    pub failures: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub document: usize,
    pub ambiguity: usize,
    pub capability: usize,
}

impl Quota {
    pub fn get(&self, label: UncertaintySource) -> usize {
        match label {
            UncertaintySource::Document => self.document,
            UncertaintySource::Ambiguity => self.ambiguity,
            UncertaintySource::Capability => self.capability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaSpec {
    pub per_dataset: BTreeMap<String, Quota>,
    #[serde(default)]
    pub seed: u64,
}

impl QuotaSpec {
    /// 50 document, 50 ambiguity and 30 capability cases for each of the
    /// five source datasets.
    pub fn paper(seed: u64) -> Self {
        let quota = Quota {
            document: 50,
            ambiguity: 50,
            capability: 30,
        };
        let per_dataset = ["HotpotQA", "AmbigQA", "TechQA", "ExpertQA", "ToolBench"]
            .iter()
            .map(|d| (d.to_string(), quota))
            .collect();
        QuotaSpec { per_dataset, seed }
    }

    pub fn total(&self) -> usize {
        self.per_dataset.values().map(|q| q.document + q.ambiguity + q.capability).sum()
    }
}

/// Samples each (dataset, label) quota uniformly without replacement.
/// Unselected labeled cases become training cases; unlabeled cases are
/// dropped. Both outputs keep input order.
pub fn assemble_benchmark(cases: &[Case], quota: &QuotaSpec) -> Result<(Vec<Case>, Vec<Case>)> {
    let mut pools: BTreeMap<(String, UncertaintySource), Vec<usize>> = BTreeMap::new();
    for (i, case) in cases.iter().enumerate() {
        if let Some(label) = case.label {
            pools.entry((case.dataset.name().to_string(), label)).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(quota.seed);
    let mut selected = vec![false; cases.len()];
    for (dataset, q) in &quota.per_dataset {
        for label in UncertaintySource::ALL {
            let required = q.get(label);
            if required == 0 {
                continue;
            }
            let pool = pools.get(&(dataset.clone(), label)).map(Vec::as_slice).unwrap_or(&[]);
            if pool.len() < required {
                return Err(Error::Shortfall {
                    dataset: Dataset::from_name(dataset),
                    label,
                    available: pool.len(),
                    required,
                });
            }
            for idx in rand::seq::index::sample(&mut rng, pool.len(), required) {
                selected[pool[idx]] = true;
            }
        }
    }
    let mut benchmark = Vec::new();
    let mut training = Vec::new();
    for (case, chosen) in cases.iter().zip(selected) {
        if case.label.is_none() {
            continue;
        }
        let mut case = case.clone();
        if chosen {
            case.split = Split::Benchmark;
            benchmark.push(case);
        } else {
            case.split = Split::Training;
            training.push(case);
        }
    }
    Ok((benchmark, training))
}
