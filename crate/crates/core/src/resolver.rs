//! Routes a judged case to retrieval, the simulated user, or
//! chain-of-thought, and produces the final answer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, Message, ModelRef, SamplingParams};
use crate::model::{Case, Channel, InteractionTranscript, Judgment, Turn, UncertaintySource};
use crate::prompts;
use crate::retrieval::Corpus;
use crate::text::truncate_tokens;

pub const USER_SIM_MAX_TOKENS: u32 = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct UserSimConfig {
    pub model: ModelRef,
    pub max_tokens: u32,
}

impl UserSimConfig {
    pub fn new(model: ModelRef) -> Self {
        UserSimConfig {
            model,
            max_tokens: USER_SIM_MAX_TOKENS,
        }
    }
}

/// Answers an inquiry from the user's original intention. Overlong replies
/// are cut to 50 whitespace tokens; a reply carrying the beyond-scope
/// sentence is reduced to exactly that sentence.
pub fn simulate_user(
    gateway: &Gateway,
    intention: &str,
    actual_query: &str,
    inquiry: &str,
    cfg: &UserSimConfig,
) -> Result<String> {
    if intention.trim().is_empty() || actual_query.trim().is_empty() || inquiry.trim().is_empty() {
        return Err(Error::Parameter("user simulation needs intention, query and inquiry".into()));
    }
    let prompt = prompts::simulate_user(intention, actual_query, inquiry);
    let reply = gateway.complete(&cfg.model, &[Message::user(prompt)], &SamplingParams::answering(cfg.max_tokens))?;
    if reply.contains(prompts::BEYOND_SCOPE) {
        return Ok(prompts::BEYOND_SCOPE.to_string());
    }
    Ok(truncate_tokens(&reply, cfg.max_tokens as usize))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolveConfig {
    /// Documents retrieved per inquiry.
    pub k: usize,
    /// Overrides the per-dataset answer budget when set.
    pub answer_max_tokens: Option<u32>,
    pub cot_max_tokens: u32,
    pub temperature: f64,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        ResolveConfig {
            k: 5,
            answer_max_tokens: None,
            cot_max_tokens: 1024,
            temperature: 0.0,
        }
    }
}

pub struct Resolver<'a> {
    pub gateway: &'a Gateway,
    /// Generates missing inquiries and the final answer.
    pub model: &'a ModelRef,
    pub user_sim: &'a UserSimConfig,
    pub corpus: Option<&'a Corpus>,
    pub config: &'a ResolveConfig,
}

impl<'a> Resolver<'a> {
    pub fn budget(&self, case: &Case) -> u32 {
        self.config
            .answer_max_tokens
            .unwrap_or_else(|| case.dataset.answer_token_budget())
    }

    /// Runs the single interaction turn for `source` with `inquiry`.
    /// Capability has no interaction and yields `None`.
    pub fn interact(&self, case: &Case, source: UncertaintySource, inquiry: &str) -> Result<Option<Turn>> {
        match source {
            UncertaintySource::Capability => Ok(None),
            UncertaintySource::Document => {
                let corpus = self
                    .corpus
                    .ok_or_else(|| Error::Config("the retrieval channel needs a corpus".into()))?;
                let present: Vec<&str> = case.actual_documents.iter().map(|d| d.doc_id.as_str()).collect();
                let found: Vec<_> = if corpus.is_empty() {
                    Vec::new()
                } else {
                    corpus
                        .search(inquiry, self.config.k + present.len())?
                        .into_iter()
                        .filter(|h| !present.contains(&h.document.doc_id.as_str()))
                        .take(self.config.k)
                        .map(|h| h.document.clone())
                        .collect()
                };
                Ok(Some(Turn {
                    channel: Channel::Retrieval,
                    inquiry: inquiry.to_string(),
                    response: prompts::render_documents(&found),
                }))
            }
            UncertaintySource::Ambiguity => {
                let response = simulate_user(self.gateway, &case.original_query, &case.actual_query, inquiry, self.user_sim)?;
                Ok(Some(Turn {
                    channel: Channel::User,
                    inquiry: inquiry.to_string(),
                    response,
                }))
            }
        }
    }

    /// A source-specific inquiry for judgments that carry none.
    pub fn fresh_inquiry(&self, case: &Case, source: UncertaintySource) -> Result<String> {
        let documents = prompts::render_documents(&case.actual_documents);
        let prompt = match source {
            UncertaintySource::Document => prompts::retrieval_inquiry(&case.actual_query, &documents),
            UncertaintySource::Ambiguity => prompts::clarification_inquiry(&case.actual_query, &documents),
            UncertaintySource::Capability => return Ok(String::new()),
        };
        let params = SamplingParams {
            temperature: self.config.temperature,
            ..SamplingParams::answering(256)
        };
        let text = self.gateway.complete(self.model, &[Message::user(prompt)], &params)?;
        Ok(text.trim().to_string())
    }

    pub fn resolve(&self, case: &Case, judgment: &Judgment) -> Result<InteractionTranscript> {
        self.resolve_inner(case, judgment)
            .map_err(|e| e.context(format!("resolving case `{}`", case.id)))
    }

    fn resolve_inner(&self, case: &Case, judgment: &Judgment) -> Result<InteractionTranscript> {
        let source = judgment.predicted;
        let turns = if source == UncertaintySource::Capability {
            Vec::new()
        } else {
            let inquiry = match judgment.inquiry.as_deref().map(str::trim).filter(|q| !q.is_empty()) {
                Some(q) => q.to_string(),
                None => self.fresh_inquiry(case, source)?,
            };
            self.interact(case, source, &inquiry)?.into_iter().collect()
        };
        let final_answer = self.answer_query(case, &turns, self.model, turns.is_empty())?;
        Ok(InteractionTranscript {
            case_id: case.id.clone(),
            turns,
            final_answer,
        })
    }

    /// Answers the case's actual query given its documents and the turns.
    pub fn answer_query(&self, case: &Case, turns: &[Turn], model: &ModelRef, cot: bool) -> Result<String> {
        let documents = prompts::render_documents(&case.actual_documents);
        let history = prompts::render_history(turns);
        let budget = self.budget(case);
        let (prompt, max_tokens) = if cot {
            (prompts::answer_query_cot(&case.actual_query, &documents, &history), self.config.cot_max_tokens)
        } else {
            (prompts::answer_query(&case.actual_query, &documents, &history, budget), budget)
        };
        let params = SamplingParams {
            temperature: self.config.temperature,
            ..SamplingParams::answering(max_tokens)
        };
        self.gateway.complete(model, &[Message::user(prompt)], &params)
    }
}

/// Highest score wins; ties go to the earliest candidate.
pub fn pick_best(candidates: Vec<(String, f64)>) -> Option<(String, f64)> {
    let mut best: Option<(String, f64)> = None;
    for (answer, score) in candidates {
        if best.as_ref().map_or(true, |(_, s)| score > *s) {
            best = Some((answer, score));
        }
    }
    best
}
