//! Uncertainty-source diagnosis: direct prompting, inquiry generation, and
//! answer-uniqueness probing with majority voting and the two-sample
//! disagreement fallback. Also an empirical answer-entropy estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{value_text, Gateway, Message, ModelRef, SamplingParams};
use crate::model::{Case, Channel, Judgment, Strategy, Turn, UncertaintySource};
use crate::prompts;
use crate::text::{normalize, token_overlap, yes_no};

/// Inquiry/query overlap at or above which an inquiry counts as a restatement.
pub const REPHRASE_OVERLAP: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    /// Ask the direct prompt first and accept a capability verdict outright.
    pub capability_by_prompt: bool,
    pub n_probes: usize,
    pub seed: u64,
    /// Optional few-shot text sent as a system message before every prompt.
    pub prompt_prefix: Option<String>,
    /// Sampling for judgments, inquiries and probe answers.
    pub sampling: SamplingParams,
    /// Sampling for the judge model's yes/no decisions.
    pub judge_sampling: SamplingParams,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            capability_by_prompt: true,
            n_probes: 2,
            seed: 0,
            prompt_prefix: None,
            sampling: SamplingParams::judging(),
            judge_sampling: SamplingParams::answering(512),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InquiryProposal {
    pub inquiry: String,
    pub choice: UncertaintySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Unique,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    pub verdict: Verdict,
    /// The preset answer followed by every probe answer.
    pub probe_answers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conditioning {
    /// Query with gold documents.
    XD,
    /// Query with the clarification, no documents.
    XC,
    /// Query with gold documents and the clarification.
    XDC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Nats.
    pub value: f64,
    pub cluster_sizes: Vec<usize>,
    pub n_samples: usize,
}

/// First two agree → that value, otherwise the third.
pub fn majority_vote(samples: &[UncertaintySource]) -> Result<UncertaintySource> {
    match samples {
        [a, b, _] if a == b => Ok(*a),
        [_, _, c] => Ok(*c),
        _ => Err(Error::Parameter(format!("majority vote needs 3 samples, got {}", samples.len()))),
    }
}

/// −Σ (k/n) ln(k/n) over cluster sizes.
pub fn entropy_from_cluster_sizes(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let h: f64 = sizes
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Parses a bare A/B/C token, tolerating quotes, markdown and punctuation.
pub fn parse_letter(text: &str) -> Option<UncertaintySource> {
    let core = text.trim().trim_matches(|c: char| !c.is_alphanumeric());
    let mut chars = core.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => UncertaintySource::from_letter(c.to_ascii_uppercase()),
        _ => None,
    }
}

/// Whether `inquiry` merely restates `query`.
pub fn is_rephrase(inquiry: &str, query: &str) -> bool {
    token_overlap(inquiry, query) >= REPHRASE_OVERLAP
}

/// One case's judging chain over a judged model and a judge model.
pub struct Judge<'a> {
    pub gateway: &'a Gateway,
    /// The model whose uncertainty is diagnosed.
    pub model: &'a ModelRef,
    /// Decides distinctness, coherence and answer equivalence.
    pub judge: &'a ModelRef,
    pub config: &'a JudgeConfig,
}

impl<'a> Judge<'a> {
    pub fn new(gateway: &'a Gateway, model: &'a ModelRef, judge: &'a ModelRef, config: &'a JudgeConfig) -> Self {
        Judge { gateway, model, judge, config }
    }

    fn conversation(&self, prompt: String) -> Vec<Message> {
        let mut messages = Vec::with_capacity(2);
        if let Some(prefix) = self.config.prompt_prefix.as_deref().filter(|p| !p.trim().is_empty()) {
            messages.push(Message::system(prefix));
        }
        messages.push(Message::user(prompt));
        messages
    }

    fn sampling(&self, offset: u64) -> SamplingParams {
        self.config.sampling.with_seed(self.config.seed.wrapping_add(offset))
    }

    fn ask_judge(&self, prompt: String, key: &str) -> Result<bool> {
        let map = self.gateway.complete_structured(
            self.judge,
            &[Message::user(prompt)],
            &self.config.judge_sampling,
            &[key],
        )?;
        yes_no(&map[key])
    }

    /// Single direct-prompt judgment; an invalid token is re-asked once.
    pub fn judge_by_prompt(&self, case: &Case, sample: u64) -> Result<UncertaintySource> {
        let prompt = prompts::judge_source(&case.actual_query, &prompts::render_documents(&case.actual_documents));
        let mut messages = self.conversation(prompt);
        let params = self.sampling(sample);
        let first = self.gateway.complete(self.model, &messages, &params)?;
        if let Some(source) = parse_letter(&first) {
            return Ok(source);
        }
        messages.push(Message::assistant(first.clone()));
        messages.push(Message::user(prompts::SINGLE_LETTER_REMINDER));
        let second = self.gateway.complete(self.model, &messages, &params)?;
        parse_letter(&second).ok_or_else(|| {
            Error::InvalidJudgment(format!("expected A, B or C; got {first:?} then {second:?}"))
        })
    }

    /// One inquiry with the model's channel choice. Inquiries that restate
    /// the query are forced to capability.
    pub fn generate_inquiry(&self, case: &Case, sample: u64) -> Result<InquiryProposal> {
        let prompt = prompts::inquiry_with_choice(&case.actual_query, &prompts::render_documents(&case.actual_documents));
        let map = self.gateway.complete_structured(
            self.model,
            &self.conversation(prompt),
            &self.sampling(sample),
            &["Inquiry", "Choice"],
        )?;
        let inquiry = value_text(&map["Inquiry"]).trim().to_string();
        if inquiry.is_empty() {
            return Err(Error::InvalidJudgment("empty inquiry".into()));
        }
        let choice_text = value_text(&map["Choice"]);
        let choice = parse_letter(&choice_text)
            .ok_or_else(|| Error::InvalidJudgment(format!("invalid choice {choice_text:?}")))?;
        let choice = if is_rephrase(&inquiry, &case.actual_query) {
            UncertaintySource::Capability
        } else {
            choice
        };
        Ok(InquiryProposal { inquiry, choice })
    }

    fn answer_to_inquiry(&self, case: &Case, inquiry: &str, previous: &[String], sample: u64) -> Result<String> {
        let prompt = prompts::answer_inquiry(
            &case.actual_query,
            &prompts::render_documents(&case.actual_documents),
            inquiry,
            &prompts::render_answers(previous),
        );
        let map = self
            .gateway
            .complete_structured(self.model, &self.conversation(prompt), &self.sampling(sample), &["Response"])?;
        let answer = value_text(&map["Response"]).trim().to_string();
        if answer.is_empty() {
            return Err(Error::InvalidJudgment("empty inquiry answer".into()));
        }
        Ok(answer)
    }

    /// The answer to `inquiry` given with no possible answers supplied.
    pub fn preset_answer(&self, case: &Case, inquiry: &str) -> Result<String> {
        self.answer_to_inquiry(case, inquiry, &[], 100)
    }

    /// True when the judge model accepts the inquiry answer as a direct
    /// answer to the query itself, i.e. the inquiry restated the query.
    pub fn check_rephrase(&self, case: &Case, inquiry: &str, inquiry_answer: &str) -> Result<bool> {
        if inquiry.trim().is_empty() || inquiry_answer.trim().is_empty() {
            return Err(Error::Parameter("inquiry and inquiry answer must be non-empty".into()));
        }
        self.ask_judge(prompts::judge_coherent_answer(&case.actual_query, inquiry_answer), "Coherent")
    }

    pub fn probe_answer_uniqueness(&self, case: &Case, inquiry: &str, n_probes: usize) -> Result<UniquenessVerdict> {
        if inquiry.trim().is_empty() {
            return Err(Error::Parameter("inquiry must be non-empty".into()));
        }
        let preset = self.preset_answer(case, inquiry)?;
        self.probe_from_preset(case, inquiry, preset, n_probes)
    }

    /// Asks for new answers given everything said so far; stops at the first
    /// one the judge model finds distinct. Byte-for-byte repeats (after
    /// normalization) never reach the judge.
    pub fn probe_from_preset(
        &self,
        case: &Case,
        inquiry: &str,
        preset: String,
        n_probes: usize,
    ) -> Result<UniquenessVerdict> {
        if n_probes == 0 {
            return Err(Error::Parameter("n_probes must be positive".into()));
        }
        let mut answers = vec![preset];
        for probe in 0..n_probes {
            let candidate = self.answer_to_inquiry(case, inquiry, &answers, 101 + probe as u64)?;
            let key = normalize(&candidate);
            let repeated = answers.iter().any(|a| normalize(a) == key);
            let distinct = !repeated
                && self.ask_judge(
                    prompts::judge_distinct_answer(inquiry, &prompts::render_answers(&answers), &candidate),
                    "Distinct",
                )?;
            answers.push(candidate);
            if distinct {
                return Ok(UniquenessVerdict {
                    verdict: Verdict::Multiple,
                    probe_answers: answers,
                });
            }
        }
        Ok(UniquenessVerdict {
            verdict: Verdict::Unique,
            probe_answers: answers,
        })
    }

    pub fn judge_source(&self, case: &Case, strategy: Strategy) -> Result<Judgment> {
        self.judge_source_inner(case, strategy)
            .map_err(|e| e.context(format!("{strategy} judgment of case `{}`", case.id)))
    }

    fn judge_source_inner(&self, case: &Case, strategy: Strategy) -> Result<Judgment> {
        let judgment = |predicted, samples, inquiry, inquiry_answers| Judgment {
            case_id: case.id.clone(),
            strategy,
            predicted,
            samples,
            inquiry,
            inquiry_answers,
        };
        match strategy {
            Strategy::Prompt => {
                let samples = self.prompt_samples(case)?;
                Ok(judgment(majority_vote(&samples)?, samples, None, Vec::new()))
            }
            Strategy::Inquiry => {
                let proposals = (0..3).map(|i| self.generate_inquiry(case, i)).collect::<Result<Vec<_>>>()?;
                let samples: Vec<_> = proposals.iter().map(|p| p.choice).collect();
                let predicted = majority_vote(&samples)?;
                let inquiry = proposals.iter().find(|p| p.choice == predicted).map(|p| p.inquiry.clone());
                Ok(judgment(predicted, samples, inquiry, Vec::new()))
            }
            Strategy::Answer => {
                if self.config.capability_by_prompt {
                    let samples = self.prompt_samples(case)?;
                    if majority_vote(&samples)? == UncertaintySource::Capability {
                        return Ok(judgment(
                            UncertaintySource::Capability,
                            samples,
                            Some(case.actual_query.clone()),
                            Vec::new(),
                        ));
                    }
                }
                let first = self.generate_inquiry(case, 0)?;
                let second = self.generate_inquiry(case, 1)?;
                let mut samples = vec![first.choice, second.choice];
                if first.choice == second.choice {
                    return Ok(judgment(first.choice, samples, Some(first.inquiry), Vec::new()));
                }
                let preset = self.preset_answer(case, &first.inquiry)?;
                let (predicted, answers) = if self.check_rephrase(case, &first.inquiry, &preset)? {
                    (UncertaintySource::Capability, vec![preset])
                } else {
                    let probe = self.probe_from_preset(case, &first.inquiry, preset, self.config.n_probes)?;
                    let source = match probe.verdict {
                        Verdict::Unique => UncertaintySource::Document,
                        Verdict::Multiple => UncertaintySource::Ambiguity,
                    };
                    (source, probe.probe_answers)
                };
                samples.push(predicted);
                Ok(judgment(predicted, samples, Some(first.inquiry), answers))
            }
        }
    }

    fn prompt_samples(&self, case: &Case) -> Result<Vec<UncertaintySource>> {
        (0..3).map(|i| self.judge_by_prompt(case, i)).collect()
    }

    /// Samples `n` answers under a conditioning and clusters them by
    /// judge-decided equivalence, closed transitively.
    pub fn estimate_answer_entropy(&self, case: &Case, condition: Conditioning, n: usize) -> Result<EntropyEstimate> {
        if n < 2 {
            return Err(Error::Parameter("entropy needs at least 2 samples".into()));
        }
        let clarification = match condition {
            Conditioning::XD => None,
            Conditioning::XC | Conditioning::XDC => Some(
                case.clarification
                    .as_deref()
                    .filter(|c| !c.trim().is_empty())
                    .ok_or_else(|| Error::Parameter(format!("case `{}` has no clarification", case.id)))?,
            ),
        };
        let documents = match condition {
            Conditioning::XC => prompts::render_documents(&[]),
            Conditioning::XD | Conditioning::XDC => prompts::render_documents(&case.gold_documents),
        };
        let history = match clarification {
            None => prompts::render_history(&[]),
            Some(c) => prompts::render_history(&[Turn {
                channel: Channel::User,
                inquiry: case.gold_inquiry.clone().unwrap_or_else(|| "Could you clarify your query?".into()),
                response: c.to_string(),
            }]),
        };
        let prompt = prompts::answer_query(&case.actual_query, &documents, &history, case.dataset.answer_token_budget());
        let messages = self.conversation(prompt);
        let params = self.config.sampling.with_max_tokens(case.dataset.answer_token_budget());
        let answers = (0..n)
            .map(|i| {
                self.gateway
                    .complete(self.model, &messages, &params.with_seed(self.config.seed.wrapping_add(200 + i as u64)))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut clusters = UnionFind::new(n);
        let keys: Vec<String> = answers.iter().map(|a| normalize(a)).collect();
        for i in 0..n {
            for j in i + 1..n {
                if clusters.find(i) == clusters.find(j) {
                    continue;
                }
                let same = keys[i] == keys[j]
                    || self.ask_judge(
                        prompts::judge_equivalent_answers(&case.actual_query, &answers[i], &answers[j]),
                        "Equivalent",
                    )?
                    || self.ask_judge(
                        prompts::judge_equivalent_answers(&case.actual_query, &answers[j], &answers[i]),
                        "Equivalent",
                    )?;
                if same {
                    clusters.union(i, j);
                }
            }
        }
        let cluster_sizes = clusters.sizes();
        Ok(EntropyEstimate {
            value: entropy_from_cluster_sizes(&cluster_sizes),
            cluster_sizes,
            n_samples: n,
        })
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Cluster sizes, largest first.
    fn sizes(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut counts = vec![0usize; n];
        for i in 0..n {
            let r = self.find(i);
            counts[r] += 1;
        }
        let mut sizes: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}
