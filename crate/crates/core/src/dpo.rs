//! Preference pairs over inquiries: seed collection across generator
//! models, interaction-based labeling, judge-based online pairing, on-policy
//! replacement, and the HTTP labeling environment used during training.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bench::success_threshold;
use crate::error::{Error, Result};
use crate::evaluator::score_answer;
use crate::gateway::{value_text, Gateway, Message, ModelRef, SamplingParams};
use crate::judge::parse_letter;
use crate::model::{read_jsonl, write_jsonl, Case, Split, UncertaintySource};
use crate::prompts;
use crate::resolver::{ResolveConfig, Resolver, UserSimConfig};
use crate::retrieval::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Seed,
    OnPolicy,
    OnlineJudge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub case_id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub provenance: Provenance,
    /// Success threshold the labels were decided with, when interaction-labeled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

pub fn read_pairs(path: &Path) -> Result<Vec<PreferencePair>> {
    let pairs: Vec<PreferencePair> = read_jsonl(path)?;
    for (i, p) in pairs.iter().enumerate() {
        if p.chosen == p.rejected || p.prompt.trim().is_empty() {
            return Err(Error::Record {
                line: i + 1,
                message: "pair needs a non-empty prompt and chosen != rejected".into(),
            });
        }
    }
    Ok(pairs)
}

pub fn write_pairs(path: &Path, pairs: &[PreferencePair]) -> Result<()> {
    write_jsonl(path, pairs)
}

/// The rendered inquiry-generation prompt a pair is trained on.
pub fn pair_prompt(case: &Case) -> String {
    prompts::inquiry_with_choice(&case.actual_query, &prompts::render_documents(&case.actual_documents))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub case_id: String,
    pub inquiry: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelVerdict {
    Chosen,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub verdict: LabelVerdict,
    pub resolved_answer: String,
    pub score: f64,
}

/// Resolves inquiries through each case's gold channel and grades the result.
pub struct Labeler<'a> {
    pub gateway: &'a Gateway,
    /// Answers after the interaction.
    pub model: &'a ModelRef,
    pub judge: &'a ModelRef,
    pub user_sim: &'a UserSimConfig,
    pub corpus: Option<&'a Corpus>,
    pub resolve_config: &'a ResolveConfig,
}

impl<'a> Labeler<'a> {
    fn resolver(&self) -> Resolver<'_> {
        Resolver {
            gateway: self.gateway,
            model: self.model,
            user_sim: self.user_sim,
            corpus: self.corpus,
            config: self.resolve_config,
        }
    }

    /// Chosen iff the answer after interacting with `inquiry` scores at least
    /// `threshold` (the dataset default when `None`).
    pub fn label_candidate(&self, case: &Case, inquiry: &str, threshold: Option<f64>) -> Result<LabelResponse> {
        let source = match case.label {
            Some(UncertaintySource::Capability) | None => return Err(Error::UnsupportedCase(case.id.clone())),
            Some(s) => s,
        };
        if inquiry.trim().is_empty() {
            return Err(Error::Parameter("inquiry must be non-empty".into()));
        }
        let resolver = self.resolver();
        let turns: Vec<_> = resolver.interact(case, source, inquiry.trim())?.into_iter().collect();
        let answer = resolver.answer_query(case, &turns, self.model, false)?;
        let score = score_answer(self.gateway, case, &answer, self.judge)?;
        let threshold = threshold.unwrap_or_else(|| success_threshold(&case.dataset));
        Ok(LabelResponse {
            verdict: if score >= threshold { LabelVerdict::Chosen } else { LabelVerdict::Rejected },
            resolved_answer: answer,
            score,
        })
    }

    fn baseline_score(&self, case: &Case) -> Result<f64> {
        let answer = self.resolver().answer_query(case, &[], self.model, false)?;
        score_answer(self.gateway, case, &answer, self.judge)
    }

    fn generate(&self, case: &Case, generator: &ModelRef) -> Result<String> {
        let map = self.gateway.complete_structured(
            generator,
            &[Message::user(pair_prompt(case))],
            &SamplingParams::answering(256),
            &["Inquiry"],
        )?;
        let inquiry = value_text(&map["Inquiry"]).trim().to_string();
        if inquiry.is_empty() {
            return Err(Error::InvalidJudgment("empty inquiry".into()));
        }
        Ok(inquiry)
    }

    fn seed_pairs_for(&self, case: &Case, generators: &[ModelRef]) -> Result<Vec<PreferencePair>> {
        let threshold = success_threshold(&case.dataset);
        if self.baseline_score(case)? >= threshold {
            return Ok(Vec::new());
        }
        let mut succeeded: Vec<String> = Vec::new();
        let mut failed: Vec<String> = Vec::new();
        for generator in generators {
            let inquiry = self.generate(case, generator)?;
            if succeeded.contains(&inquiry) || failed.contains(&inquiry) {
                continue;
            }
            match self.label_candidate(case, &inquiry, Some(threshold))?.verdict {
                LabelVerdict::Chosen => succeeded.push(inquiry),
                LabelVerdict::Rejected => failed.push(inquiry),
            }
        }
        let prompt = pair_prompt(case);
        Ok(succeeded
            .iter()
            .flat_map(|chosen| {
                failed.iter().map(|rejected| PreferencePair {
                    case_id: case.id.clone(),
                    prompt: prompt.clone(),
                    chosen: chosen.clone(),
                    rejected: rejected.clone(),
                    provenance: Provenance::Seed,
                    threshold: Some(threshold),
                })
            })
            .collect())
    }

    /// Pairs every succeeding inquiry against every failing one, for cases
    /// the model cannot answer without an inquiry. Capability and unlabeled
    /// cases are skipped; cases that error are logged and skipped.
    pub fn collect_seed_pairs(&self, cases: &[Case], generators: &[ModelRef]) -> Result<Vec<PreferencePair>> {
        if generators.len() < 2 {
            return Err(Error::Parameter("seed pairs need at least two generator models".into()));
        }
        let eligible: Vec<&Case> = cases
            .iter()
            .filter(|c| matches!(c.label, Some(UncertaintySource::Document | UncertaintySource::Ambiguity)))
            .collect();
        let per_case: Vec<Vec<PreferencePair>> = eligible
            .par_iter()
            .map(|case| {
                self.seed_pairs_for(case, generators).unwrap_or_else(|e| {
                    tracing::warn!(case = %case.id, error = %e, "seed pair collection failed");
                    Vec::new()
                })
            })
            .collect();
        Ok(per_case.into_iter().flatten().collect())
    }
}

/// The judge picks the better of two inquiries without any interaction.
/// A tie or refusal is re-asked once; a second one drops the pair.
pub fn pair_online(
    gateway: &Gateway,
    case: &Case,
    inquiry_a: &str,
    inquiry_b: &str,
    judge: &ModelRef,
) -> Result<Option<PreferencePair>> {
    if inquiry_a.trim() == inquiry_b.trim() {
        return Err(Error::Parameter("online pairing needs two different inquiries".into()));
    }
    let prompt = prompts::judge_better_inquiry(
        &case.actual_query,
        &prompts::render_documents(&case.actual_documents),
        inquiry_a,
        inquiry_b,
    );
    let mut messages = vec![Message::user(prompt)];
    let params = SamplingParams::answering(256);
    for attempt in 0..2 {
        let reply = match gateway.complete_structured(judge, &messages, &params, &["Better"]) {
            Ok(map) => value_text(&map["Better"]),
            Err(Error::StructuredOutput { second, .. }) => second,
            Err(Error::MissingKey { .. }) => String::new(),
            Err(e) => return Err(e),
        };
        let winner = match parse_letter(&reply) {
            Some(UncertaintySource::Document) => Some((inquiry_a, inquiry_b)),
            Some(UncertaintySource::Ambiguity) => Some((inquiry_b, inquiry_a)),
            _ => None,
        };
        if let Some((chosen, rejected)) = winner {
            return Ok(Some(PreferencePair {
                case_id: case.id.clone(),
                prompt: pair_prompt(case),
                chosen: chosen.to_string(),
                rejected: rejected.to_string(),
                provenance: Provenance::OnlineJudge,
                threshold: None,
            }));
        }
        if attempt == 0 {
            messages.push(Message::assistant(if reply.is_empty() { "(no verdict)".into() } else { reply }));
            messages.push(Message::user(r#"You must pick exactly one. Respond with Dict{"Better": "A"/"B"} only."#));
        }
    }
    tracing::warn!(case = %case.id, "online pair dropped: judge gave no verdict twice");
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementEvent {
    pub case_id: String,
    pub verdict: LabelVerdict,
    pub replaced: String,
    pub inquiry: String,
}

/// Applies one on-policy label to the stored pairs of `case_id`: a chosen
/// inquiry overwrites their chosen side, a rejected one their rejected side.
/// With `keep_both` a chosen inquiry is added as a new pair instead.
pub fn apply_on_policy(
    pairs: &mut Vec<PreferencePair>,
    case_id: &str,
    inquiry: &str,
    verdict: LabelVerdict,
    keep_both: bool,
) -> Vec<ReplacementEvent> {
    let mut events = Vec::new();
    let mut added = Vec::new();
    for pair in pairs.iter_mut().filter(|p| p.case_id == case_id) {
        let slot = match verdict {
            LabelVerdict::Chosen => &pair.rejected,
            LabelVerdict::Rejected => &pair.chosen,
        };
        if slot == inquiry {
            continue;
        }
        match (verdict, keep_both) {
            (LabelVerdict::Chosen, true) => added.push(PreferencePair {
                chosen: inquiry.to_string(),
                provenance: Provenance::OnPolicy,
                ..pair.clone()
            }),
            _ => {
                let target = match verdict {
                    LabelVerdict::Chosen => &mut pair.chosen,
                    LabelVerdict::Rejected => &mut pair.rejected,
                };
                if target == inquiry {
                    continue;
                }
                events.push(ReplacementEvent {
                    case_id: case_id.to_string(),
                    verdict,
                    replaced: std::mem::replace(target, inquiry.to_string()),
                    inquiry: inquiry.to_string(),
                });
                pair.provenance = Provenance::OnPolicy;
            }
        }
    }
    for pair in added {
        events.push(ReplacementEvent {
            case_id: case_id.to_string(),
            verdict,
            replaced: String::new(),
            inquiry: inquiry.to_string(),
        });
        pairs.push(pair);
    }
    events
}

/// Owned state behind the labeling service.
pub struct Environment {
    pub gateway: Arc<Gateway>,
    pub model: ModelRef,
    pub judge: ModelRef,
    pub user_sim: UserSimConfig,
    pub corpus: Option<Arc<Corpus>>,
    pub resolve_config: ResolveConfig,
    cases: Vec<Case>,
    by_id: HashMap<String, usize>,
    label_calls: AtomicUsize,
}

impl Environment {
    pub fn new(
        gateway: Arc<Gateway>,
        model: ModelRef,
        judge: ModelRef,
        user_sim: UserSimConfig,
        corpus: Option<Arc<Corpus>>,
        cases: Vec<Case>,
    ) -> Result<Self> {
        crate::model::ensure_unique(cases.iter().map(|c| c.id.as_str()))?;
        let by_id = cases.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        Ok(Environment {
            gateway,
            model,
            judge,
            user_sim,
            corpus,
            resolve_config: ResolveConfig::default(),
            cases,
            by_id,
            label_calls: AtomicUsize::new(0),
        })
    }

    pub fn case(&self, id: &str) -> Option<&Case> {
        self.by_id.get(id).map(|&i| &self.cases[i])
    }

    pub fn label_calls(&self) -> usize {
        self.label_calls.load(Ordering::SeqCst)
    }

    pub fn label(&self, request: &LabelRequest) -> Result<LabelResponse> {
        self.label_calls.fetch_add(1, Ordering::SeqCst);
        let case = self
            .case(&request.case_id)
            .ok_or_else(|| Error::NotFound(format!("case `{}`", request.case_id)))?;
        let labeler = Labeler {
            gateway: &self.gateway,
            model: &self.model,
            judge: &self.judge,
            user_sim: &self.user_sim,
            corpus: self.corpus.as_deref(),
            resolve_config: &self.resolve_config,
        };
        labeler.label_candidate(case, &request.inquiry, None)
    }
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn label_route(State(env): State<Arc<Environment>>, body: Bytes) -> Response {
    let request: LabelRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, format!("malformed label request: {e}")),
    };
    let outcome = tokio::task::spawn_blocking(move || env.label(&request)).await;
    match outcome {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e)) => match e.root() {
            Error::NotFound(_) => error_response(StatusCode::NOT_FOUND, e.to_string()),
            Error::UnsupportedCase(_) | Error::Parameter(_) => {
                error_response(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            _ => error_response(StatusCode::BAD_GATEWAY, e.to_string()),
        },
        Err(join) => error_response(StatusCode::INTERNAL_SERVER_ERROR, join.to_string()),
    }
}

#[derive(Deserialize)]
struct CasesQuery {
    split: Option<String>,
}

async fn cases_route(State(env): State<Arc<Environment>>, Query(query): Query<CasesQuery>) -> Response {
    let split = match query.split.as_deref().map(str::parse::<Split>) {
        None => None,
        Some(Ok(s)) => Some(s),
        Some(Err(e)) => return error_response(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let ids: Vec<&str> = env
        .cases
        .iter()
        .filter(|c| split.map_or(true, |s| c.split == s))
        .map(|c| c.id.as_str())
        .collect();
    Json(ids).into_response()
}

async fn case_route(State(env): State<Arc<Environment>>, UrlPath(id): UrlPath<String>) -> Response {
    match env.case(&id) {
        None => error_response(StatusCode::NOT_FOUND, format!("unknown case `{id}`")),
        Some(case) => Json(json!({
            "case_id": case.id,
            "prompt": pair_prompt(case),
            "dataset": case.dataset,
            "label": case.label,
            "split": case.split,
            "actual_query": case.actual_query,
        }))
        .into_response(),
    }
}

async fn stats_route(State(env): State<Arc<Environment>>) -> Response {
    Json(json!({ "label_calls": env.label_calls() })).into_response()
}

pub fn router(env: Arc<Environment>) -> Router {
    Router::new()
        .route("/v1/label", post(label_route))
        .route("/v1/cases", get(cases_route))
        .route("/v1/case/{id}", get(case_route))
        .route("/v1/stats", get(stats_route))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(env)
}

/// A running environment service. Dropping it stops the server.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServiceHandle {
    /// Blocks until the server exits.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `bind` (port 0 picks a free port) and serves on a background thread.
pub fn serve_environment(bind: SocketAddr, env: Arc<Environment>) -> Result<ServiceHandle> {
    let listener = std::net::TcpListener::bind(bind).map_err(|e| Error::Config(format!("bind {bind}: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::Config(format!("bind {bind}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| Error::Config(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("runtime: {e}")))?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(env);
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::from_std(listener) {
                Ok(l) => l,
                Err(e) => {
                    tracing::error!(error = %e, "environment listener failed");
                    return;
                }
            };
            let served = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
            if let Err(e) = served {
                tracing::error!(error = %e, "environment service stopped");
            }
        });
    });
    Ok(ServiceHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
