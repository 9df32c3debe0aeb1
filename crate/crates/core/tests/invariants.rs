use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use confuse_core::bench::success_threshold;
use confuse_core::dpo::{Labeler, LabelVerdict, Provenance};
use confuse_core::gateway::{ChatRequest, Gateway, ModelRef, ScriptedBackend};
use confuse_core::judge::majority_vote;
use confuse_core::model::{Case, Channel, Dataset, Document, Judgment, Split, Strategy, UncertaintySource};
use confuse_core::resolver::{simulate_user, ResolveConfig, Resolver, UserSimConfig};
use confuse_core::retrieval::Corpus;
use confuse_core::text::whitespace_tokens;
use proptest::prelude::*;

fn source() -> impl proptest::strategy::Strategy<Value = UncertaintySource> {
    prop_oneof![
        Just(UncertaintySource::Document),
        Just(UncertaintySource::Ambiguity),
        Just(UncertaintySource::Capability),
    ]
}

fn ambiguous_case() -> Case {
    let d = Document::new("y", "Yoga", "Yoga studios offer classes for all levels.", true);
    Case {
        id: "yoga".into(),
        dataset: Dataset::ExpertQA,
        original_query: "locate the best yoga class in New York".into(),
        actual_query: "locate the best yoga class in my city".into(),
        gold_documents: vec![d.clone()],
        actual_documents: vec![d],
        clarification: Some("the city is New York".into()),
        gold_answer: "Sky Ting Yoga".into(),
        gold_inquiry: Some("Which city?".into()),
        label: Some(UncertaintySource::Ambiguity),
        split: Split::Training,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn user_sim_reply_is_bounded(words in prop::collection::vec("[a-zA-Z]{1,8}", 0..200)) {
        let reply = words.join(" ");
        let gw = Gateway::scripted(ScriptedBackend::from_fn(move |_| Some(format!("{reply} ."))));
        let cfg = UserSimConfig::new(ModelRef::scripted("u"));
        let out = simulate_user(&gw, "intention", "query", "inquiry?", &cfg).unwrap();
        prop_assert!(whitespace_tokens(&out) <= 50);
    }

    /// Every judgment maps to one channel and at most one turn; capability
    /// never reaches the user simulator.
    #[test]
    fn routing_is_total(predicted in source(), inquiry in prop::option::of("[a-z]{3,10}( [a-z]{3,10}){0,4}\\?")) {
        let sim_calls = Arc::new(AtomicUsize::new(0));
        let counter = sim_calls.clone();
        let gw = Gateway::scripted(ScriptedBackend::from_fn(move |req: &ChatRequest| {
            let p = req.last_user_content();
            if p.contains("Original Intention:") {
                counter.fetch_add(1, Ordering::SeqCst);
                return Some("New York".into());
            }
            Some("an inquiry or an answer".into())
        }));
        let corpus = Corpus::ingest(vec![Document::new("n", "", "New York yoga studios", false)]).unwrap();
        let (m, cfg) = (ModelRef::scripted("m"), ResolveConfig::default());
        let user = UserSimConfig::new(ModelRef::scripted("u"));
        let resolver = Resolver { gateway: &gw, model: &m, user_sim: &user, corpus: Some(&corpus), config: &cfg };
        let judgment = Judgment {
            case_id: "yoga".into(),
            strategy: Strategy::Answer,
            predicted,
            samples: vec![predicted; 3],
            inquiry,
            inquiry_answers: vec![],
        };
        let t = resolver.resolve(&ambiguous_case(), &judgment).unwrap();
        prop_assert!(t.turns.len() <= 1);
        let expected = match predicted {
            UncertaintySource::Document => Channel::Retrieval,
            UncertaintySource::Ambiguity => Channel::User,
            UncertaintySource::Capability => Channel::None,
        };
        prop_assert_eq!(t.channel(), expected);
        let sims = sim_calls.load(Ordering::SeqCst);
        prop_assert_eq!(sims, usize::from(predicted == UncertaintySource::Ambiguity));
    }

    #[test]
    fn vote_returns_one_of_the_samples(samples in prop::collection::vec(source(), 3)) {
        let v = majority_vote(&samples).unwrap();
        prop_assert!(samples.contains(&v));
    }
}

/// Re-labeling the two sides of every emitted seed pair reproduces
/// chosen ≥ threshold > rejected.
#[test]
fn seed_pairs_respect_threshold() {
    let cline = Document::new("cline", "Edward F. Cline", "Edward F. Cline was a screenwriter.", true);
    let mutrux = Document::new("mutrux", "Floyd Mutrux", "Floyd Mutrux is an American screenwriter and director.", true);
    let q = "Were Edward F. Cline and Floyd Mutrux both screenwriters?";
    let case = Case {
        id: "m".into(),
        dataset: Dataset::HotpotQA,
        original_query: q.into(),
        actual_query: q.into(),
        gold_documents: vec![cline.clone(), mutrux.clone()],
        actual_documents: vec![cline.clone()],
        clarification: None,
        gold_answer: "yes".into(),
        gold_inquiry: None,
        label: Some(UncertaintySource::Document),
        split: Split::Training,
    };
    let gw = Gateway::scripted(ScriptedBackend::from_fn(|req: &ChatRequest| {
        let p = req.last_user_content();
        if p.contains("Ground Truth Answer") {
            return Some(format!(r#"{{"Correct":"{}"}}"#, if p.contains("Answer to Grade: yes") { "yes" } else { "no" }));
        }
        if p.contains(r#""Choice" : "A/B""#) {
            let q = match req.model.name.as_str() {
                "g1" => "Is Floyd Mutrux a screenwriter?",
                "g2" => "Is Floyd Mutrux a director?",
                _ => "Do cats purr?",
            };
            return Some(format!(r#"{{"Inquiry":"{q}","Choice":"A"}}"#));
        }
        Some(if p.contains("Floyd Mutrux is an American") { "yes" } else { "unsure" }.into())
    }));
    let corpus = Corpus::ingest(vec![cline, mutrux, Document::new("cats", "Cats", "Cats purr.", false)]).unwrap();
    let (m, cfg) = (ModelRef::scripted("m"), ResolveConfig::default());
    let user = UserSimConfig::new(ModelRef::scripted("u"));
    let labeler = Labeler { gateway: &gw, model: &m, judge: &m, user_sim: &user, corpus: Some(&corpus), resolve_config: &cfg };
    let gens = ["g1", "g2", "g3"].map(ModelRef::scripted);
    let pairs = labeler.collect_seed_pairs(std::slice::from_ref(&case), &gens).unwrap();
    assert_eq!(pairs.len(), 2);
    let threshold = success_threshold(&case.dataset);
    for pair in &pairs {
        assert_eq!(pair.provenance, Provenance::Seed);
        assert_eq!(pair.threshold, Some(threshold));
        let chosen = labeler.label_candidate(&case, &pair.chosen, None).unwrap();
        let rejected = labeler.label_candidate(&case, &pair.rejected, None).unwrap();
        assert_eq!(chosen.verdict, LabelVerdict::Chosen);
        assert!(chosen.score >= threshold && threshold > rejected.score);
    }
}
