//! Answer quality, inquiry quality and classification metrics, plus the
//! repeated judge → resolve → answer → score evaluation loop.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, Message, ModelRef, SamplingParams};
use crate::judge::{Judge, JudgeConfig};
use crate::model::{Case, Channel, InteractionTranscript, Judgment, Strategy, UncertaintySource};
use crate::prompts;
use crate::resolver::{pick_best, ResolveConfig, Resolver, UserSimConfig};
use crate::retrieval::Corpus;
use crate::text::{integer_score, normalize, yes_no};

/// A repeat is abandoned when more than this share of its cases fail.
pub const MAX_FAILURE_RATE: f64 = 0.10;

fn judge_params() -> SamplingParams {
    SamplingParams::answering(1024)
}

/// Asks for an integer in `range` under `key`, re-asking once when the
/// value is missing or out of range.
fn graded(gateway: &Gateway, judge: &ModelRef, prompt: String, key: &str, range: (i64, i64)) -> Result<i64> {
    let mut messages = vec![Message::user(prompt)];
    let mut last = String::new();
    for attempt in 0..2 {
        let map = gateway.complete_structured(judge, &messages, &judge_params(), &[key])?;
        let value = &map[key];
        match integer_score(value) {
            Some(s) if (range.0..=range.1).contains(&s) => return Ok(s),
            _ => last = value.to_string(),
        }
        if attempt == 0 {
            messages.push(Message::assistant(serde_json::Value::Object(map).to_string()));
            messages.push(Message::user(format!(
                "The value of \"{key}\" must be an integer from {} to {}. Respond again in the required JSON format.",
                range.0, range.1
            )));
        }
    }
    Err(Error::InvalidJudgment(format!("{key} out of range {}..={}: {last}", range.0, range.1)))
}

/// Short-answer datasets are graded correct/incorrect against the gold
/// answer; others by usefulness 1–4 mapped to (s − 1) / 3.
pub fn score_answer(gateway: &Gateway, case: &Case, answer: &str, judge: &ModelRef) -> Result<f64> {
    if answer.trim().is_empty() {
        return Err(Error::Parameter("answer must be non-empty".into()));
    }
    if case.dataset.is_short_answer() {
        if normalize(answer) == normalize(&case.gold_answer) {
            return Ok(1.0);
        }
        let prompt = prompts::judge_correctness(&case.original_query, &case.gold_answer, answer);
        let map = gateway.complete_structured(judge, &[Message::user(prompt)], &judge_params(), &["Correct"])?;
        Ok(if yes_no(&map["Correct"])? { 1.0 } else { 0.0 })
    } else {
        let prompt = prompts::judge_usefulness(&case.original_query, &case.gold_answer, answer);
        let s = graded(gateway, judge, prompt, "Usefulness", (1, 4))?;
        Ok((s - 1) as f64 / 3.0)
    }
}

/// What the gold inquiry was derived from, for the judge's reference slot.
pub fn missing_detail(case: &Case, gold_inquiry: &str) -> String {
    let detail = match case.label {
        Some(UncertaintySource::Ambiguity) => case.clarification.clone().unwrap_or_default(),
        _ => {
            let missing: Vec<String> = case
                .missing_gold_documents()
                .iter()
                .map(|d| if d.title.is_empty() { d.doc_id.clone() } else { d.title.clone() })
                .collect();
            if missing.is_empty() {
                String::new()
            } else {
                format!("missing documents: {}", missing.join("; "))
            }
        }
    };
    if detail.is_empty() {
        gold_inquiry.to_string()
    } else {
        format!("{detail}; {gold_inquiry}")
    }
}

/// Inquiry quality 1–5 mapped to (r − 1) / 4.
pub fn score_inquiry(gateway: &Gateway, case: &Case, inquiry: &str, judge: &ModelRef) -> Result<f64> {
    let gold = case
        .gold_inquiry
        .as_deref()
        .ok_or_else(|| Error::Parameter(format!("case `{}` has no gold inquiry", case.id)))?;
    let gold_docs = prompts::render_documents(&case.gold_documents);
    let actual_docs = prompts::render_documents(&case.actual_documents);
    let reference = missing_detail(case, gold);
    let prompt = prompts::evaluate_inquiry(&prompts::InquiryEvaluation {
        original_query: &case.original_query,
        gold_documents: &gold_docs,
        actual_query: &case.actual_query,
        actual_documents: &actual_docs,
        gold_inquiry: &reference,
        candidate: inquiry,
    });
    let r = graded(gateway, judge, prompt, "quality of inquiry", (1, 5))?;
    Ok((r - 1) as f64 / 4.0)
}

/// Row = gold class, column = predicted class, in document/ambiguity/capability order.
pub type Confusion = [[u64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub uca: f64,
    pub precision: BTreeMap<UncertaintySource, f64>,
    pub recall: BTreeMap<UncertaintySource, f64>,
    pub f1: BTreeMap<UncertaintySource, f64>,
    pub weighted_f1: f64,
    pub confusion: Confusion,
    pub n: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassificationMetrics {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let n: u64 = confusion.iter().flatten().sum();
        let mut precision = BTreeMap::new();
        let mut recall = BTreeMap::new();
        let mut f1 = BTreeMap::new();
        let mut weighted_f1 = 0.0;
        let mut correct = 0;
        for class in UncertaintySource::ALL {
            let i = class.index();
            let tp = confusion[i][i];
            correct += tp;
            let support: u64 = confusion[i].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[i]).sum();
            let p = ratio(tp, predicted);
            let r = ratio(tp, support);
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            precision.insert(class, p);
            recall.insert(class, r);
            f1.insert(class, f);
            weighted_f1 += ratio(support, n) * f;
        }
        ClassificationMetrics {
            uca: ratio(correct, n),
            precision,
            recall,
            f1,
            weighted_f1,
            confusion,
            n,
        }
    }
}

pub fn classification_metrics(
    judgments: &[Judgment],
    gold: &HashMap<String, UncertaintySource>,
) -> Result<ClassificationMetrics> {
    let mut confusion = [[0u64; 3]; 3];
    for j in judgments {
        let g = gold.get(&j.case_id).ok_or_else(|| Error::MissingGold(j.case_id.clone()))?;
        confusion[g.index()][j.predicted.index()] += 1;
    }
    Ok(ClassificationMetrics::from_confusion(confusion))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub aq: f64,
    pub uca: f64,
    pub iq: f64,
    pub precision: BTreeMap<UncertaintySource, f64>,
    pub recall: BTreeMap<UncertaintySource, f64>,
    pub weighted_f1: f64,
    pub n_cases: usize,
    /// Cases with an inquiry quality score.
    pub n_iq: usize,
    pub errors: usize,
}

/// Field-wise arithmetic mean; counts are summed.
pub fn mean_metrics(items: &[DatasetMetrics]) -> DatasetMetrics {
    combine(items, 1)
}

/// Field-wise mean over repeats of the same group; counts are the
/// per-repeat mean, rounded down.
pub fn mean_over_repeats(items: &[DatasetMetrics]) -> DatasetMetrics {
    combine(items, items.len().max(1))
}

fn combine(items: &[DatasetMetrics], count_divisor: usize) -> DatasetMetrics {
    let k = items.len().max(1) as f64;
    let mean = |f: &dyn Fn(&DatasetMetrics) -> f64| items.iter().map(f).sum::<f64>() / k;
    let per_class = |f: &dyn Fn(&DatasetMetrics) -> &BTreeMap<UncertaintySource, f64>| {
        UncertaintySource::ALL
            .iter()
            .map(|c| (*c, items.iter().map(|m| f(m).get(c).copied().unwrap_or(0.0)).sum::<f64>() / k))
            .collect()
    };
    DatasetMetrics {
        aq: mean(&|m| m.aq),
        uca: mean(&|m| m.uca),
        iq: mean(&|m| m.iq),
        precision: per_class(&|m| &m.precision),
        recall: per_class(&|m| &m.recall),
        weighted_f1: mean(&|m| m.weighted_f1),
        n_cases: items.iter().map(|m| m.n_cases).sum::<usize>() / count_divisor,
        n_iq: items.iter().map(|m| m.n_iq).sum::<usize>() / count_divisor,
        errors: items.iter().map(|m| m.errors).sum::<usize>() / count_divisor,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub repeat: usize,
    pub case_id: String,
    pub dataset: String,
    pub gold: UncertaintySource,
    pub predicted: Option<UncertaintySource>,
    pub samples: Vec<UncertaintySource>,
    pub inquiry: Option<String>,
    pub channel: Option<Channel>,
    pub answer: Option<String>,
    /// Which model's answer was kept: "evaluated" or "strong".
    pub answered_by: Option<String>,
    pub aq: Option<f64>,
    pub iq: Option<f64>,
    pub error: Option<String>,
}

impl CaseRow {
    pub fn failed(repeat: usize, case: &Case, gold: UncertaintySource, error: &Error) -> Self {
        CaseRow {
            repeat,
            case_id: case.id.clone(),
            dataset: case.dataset.name().to_string(),
            gold,
            predicted: None,
            samples: Vec::new(),
            inquiry: None,
            channel: None,
            answer: None,
            answered_by: None,
            aq: None,
            iq: None,
            error: Some(error.to_string()),
        }
    }
}

/// Metrics of one group of rows; failed rows only count as errors.
pub fn aggregate(rows: &[&CaseRow]) -> DatasetMetrics {
    let ok: Vec<&&CaseRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let mut confusion = [[0u64; 3]; 3];
    for r in &ok {
        if let Some(p) = r.predicted {
            confusion[r.gold.index()][p.index()] += 1;
        }
    }
    let cls = ClassificationMetrics::from_confusion(confusion);
    let aqs: Vec<f64> = ok.iter().filter_map(|r| r.aq).collect();
    let iqs: Vec<f64> = ok.iter().filter_map(|r| r.iq).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    DatasetMetrics {
        aq: mean(&aqs),
        uca: cls.uca,
        iq: mean(&iqs),
        precision: cls.precision,
        recall: cls.recall,
        weighted_f1: cls.weighted_f1,
        n_cases: ok.len(),
        n_iq: iqs.len(),
        errors: rows.len() - ok.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub seed: u64,
    pub per_dataset: BTreeMap<String, DatasetMetrics>,
    /// Mean over datasets.
    pub overall: DatasetMetrics,
}

/// Per-dataset metrics and their cross-dataset mean for one repeat.
pub fn summarize(repeat: usize, seed: u64, rows: &[CaseRow]) -> RepeatSummary {
    let mut groups: BTreeMap<String, Vec<&CaseRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.dataset.clone()).or_default().push(row);
    }
    let per_dataset: BTreeMap<String, DatasetMetrics> =
        groups.into_iter().map(|(name, rows)| (name, aggregate(&rows))).collect();
    let overall = mean_metrics(&per_dataset.values().cloned().collect::<Vec<_>>());
    RepeatSummary {
        repeat,
        seed,
        per_dataset,
        overall,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub repeats: usize,
    pub seed: u64,
    /// Per dataset, averaged over repeats.
    pub per_dataset: BTreeMap<String, DatasetMetrics>,
    /// Cross-dataset mean, averaged over repeats.
    pub averaged: DatasetMetrics,
    pub per_repeat: Vec<RepeatSummary>,
    pub errors: usize,
    pub per_case: Vec<CaseRow>,
}

impl MetricsReport {
    pub fn from_repeats(strategy: Strategy, seed: u64, per_repeat: Vec<RepeatSummary>, per_case: Vec<CaseRow>) -> Self {
        let mut names: Vec<&String> = per_repeat.iter().flat_map(|r| r.per_dataset.keys()).collect();
        names.sort();
        names.dedup();
        let per_dataset = names
            .into_iter()
            .map(|name| {
                let items: Vec<DatasetMetrics> =
                    per_repeat.iter().filter_map(|r| r.per_dataset.get(name).cloned()).collect();
                (name.clone(), mean_over_repeats(&items))
            })
            .collect();
        let averaged = mean_over_repeats(&per_repeat.iter().map(|r| r.overall.clone()).collect::<Vec<_>>());
        MetricsReport {
            strategy,
            repeats: per_repeat.len(),
            seed,
            per_dataset,
            averaged,
            errors: per_case.iter().filter(|r| r.error.is_some()).count(),
            per_repeat,
            per_case,
        }
    }
}

/// Everything one evaluation run needs besides the benchmark.
pub struct EvalSetup<'a> {
    pub gateway: &'a Gateway,
    pub evaluated: &'a ModelRef,
    pub strong: &'a ModelRef,
    pub judge: &'a ModelRef,
    pub user_sim: &'a UserSimConfig,
    pub corpus: Option<&'a Corpus>,
    pub judge_config: JudgeConfig,
    pub resolve_config: ResolveConfig,
}

impl EvalSetup<'_> {
    fn resolver(&self) -> Resolver<'_> {
        Resolver {
            gateway: self.gateway,
            model: self.evaluated,
            user_sim: self.user_sim,
            corpus: self.corpus,
            config: &self.resolve_config,
        }
    }
}

/// The evaluated model's answer from the transcript against one from the
/// strong model given the same interaction; the higher score is kept and a
/// tie keeps the evaluated model's. Returns (answer, score, answered_by).
pub fn dual_answer(
    setup: &EvalSetup<'_>,
    case: &Case,
    transcript: &InteractionTranscript,
) -> Result<(String, f64, &'static str)> {
    let resolver = setup.resolver();
    let cot = transcript.turns.is_empty();
    let own = transcript.final_answer.clone();
    let own_score = score_answer(setup.gateway, case, &own, setup.judge)?;
    let strong = resolver.answer_query(case, &transcript.turns, setup.strong, cot)?;
    let strong_score = score_answer(setup.gateway, case, &strong, setup.judge)?;
    let (answer, score) = pick_best(vec![(own.clone(), own_score), (strong, strong_score)]).expect("two candidates");
    let by = if answer == own && score == own_score { "evaluated" } else { "strong" };
    Ok((answer, score, by))
}

fn evaluate_case(setup: &EvalSetup<'_>, config: &JudgeConfig, case: &Case, strategy: Strategy, repeat: usize) -> Result<CaseRow> {
    let gold = case.label.ok_or_else(|| Error::MissingGold(case.id.clone()))?;
    let judge = Judge::new(setup.gateway, setup.evaluated, setup.judge, config);
    let judgment = judge.judge_source(case, strategy)?;
    let transcript = setup.resolver().resolve(case, &judgment)?;
    let (answer, aq, by) = dual_answer(setup, case, &transcript)?;
    let inquiry = transcript.turns.first().map(|t| t.inquiry.clone()).or(judgment.inquiry.clone());
    let iq = match (&case.gold_inquiry, transcript.turns.first()) {
        (Some(_), Some(turn)) => Some(score_inquiry(setup.gateway, case, &turn.inquiry, setup.judge)?),
        _ => None,
    };
    Ok(CaseRow {
        repeat,
        case_id: case.id.clone(),
        dataset: case.dataset.name().to_string(),
        gold,
        predicted: Some(judgment.predicted),
        samples: judgment.samples,
        inquiry,
        channel: Some(transcript.channel()),
        answer: Some(answer),
        answered_by: Some(by.to_string()),
        aq: Some(aq),
        iq,
        error: None,
    })
}

/// Evaluates every case `repeats` times with seeds `seed + repeat`.
pub fn run_eval(setup: &EvalSetup<'_>, bench: &[Case], strategy: Strategy, repeats: usize, seed: u64) -> Result<MetricsReport> {
    if bench.is_empty() {
        return Err(Error::Parameter("benchmark is empty".into()));
    }
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be positive".into()));
    }
    if let Some(case) = bench.iter().find(|c| c.label.is_none()) {
        return Err(Error::MissingGold(case.id.clone()));
    }
    let mut per_repeat = Vec::with_capacity(repeats);
    let mut per_case = Vec::with_capacity(repeats * bench.len());
    for repeat in 0..repeats {
        let repeat_seed = seed.wrapping_add(repeat as u64);
        let config = JudgeConfig {
            seed: repeat_seed,
            ..setup.judge_config.clone()
        };
        let results: Vec<Result<CaseRow>> = bench
            .par_iter()
            .map(|case| evaluate_case(setup, &config, case, strategy, repeat))
            .collect();
        let failures = results.iter().filter(|r| r.is_err()).count();
        if failures as f64 > MAX_FAILURE_RATE * bench.len() as f64 {
            let first = results.into_iter().find_map(|r| r.err()).expect("at least one failure");
            return Err(first.context(format!(
                "repeat {repeat} aborted: {failures} of {} cases failed",
                bench.len()
            )));
        }
        let rows: Vec<CaseRow> = results
            .into_iter()
            .zip(bench)
            .map(|(result, case)| match result {
                Ok(row) => row,
                Err(e) => {
                    tracing::warn!(case = %case.id, error = %e, "case failed");
                    CaseRow::failed(repeat, case, case.label.expect("checked above"), &e)
                }
            })
            .collect();
        per_repeat.push(summarize(repeat, repeat_seed, &rows));
        per_case.extend(rows);
    }
    Ok(MetricsReport::from_repeats(strategy, seed, per_repeat, per_case))
}
