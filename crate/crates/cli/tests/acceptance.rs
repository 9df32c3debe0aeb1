//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//! Run with `cargo test -p confuse-cli --test acceptance`.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use confuse_core::bench::{assemble_benchmark, Builder, Classification, QuotaSpec, RawCase};
use confuse_core::config::RunConfig;
use confuse_core::evaluator::{classification_metrics, run_eval, summarize, CaseRow, EvalSetup, MetricsReport};
use confuse_core::gateway::{ChatRequest, Gateway, ModelRef, ScriptedBackend};
use confuse_core::judge::{entropy_from_cluster_sizes, majority_vote, Conditioning, Judge, JudgeConfig};
use confuse_core::model::{read_cases, Case, Dataset, Document, Judgment, Split, Strategy, UncertaintySource};
use confuse_core::retrieval::{Corpus, PerturbationPolicy};

use UncertaintySource::{Ambiguity, Capability, Document as Doc};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for instance in 0..200 {
        let n: u64 = rng.gen_range(1..=30);
        let mut confusion = [[0u64; 3]; 3];
        for _ in 0..n {
            confusion[rng.gen_range(0..3)][rng.gen_range(0..3)] += 1;
        }
        let mut judgments = Vec::new();
        let mut gold = HashMap::new();
        for (g, row) in confusion.iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                for _ in 0..count {
                    let id = format!("c{}", judgments.len());
                    gold.insert(id.clone(), UncertaintySource::ALL[g]);
                    judgments.push(Judgment {
                        case_id: id,
                        strategy: Strategy::Answer,
                        predicted: UncertaintySource::ALL[p],
                        samples: vec![],
                        inquiry: None,
                        inquiry_answers: vec![],
                    });
                }
            }
        }
        let m = classification_metrics(&judgments, &gold).map_err(|e| e.to_string())?;

        // Brute force straight from the matrix.
        let total = n as f64;
        let correct: u64 = (0..3).map(|i| confusion[i][i]).sum();
        let uca = correct as f64 / total;
        let mut wf1 = 0.0;
        let mut weighted_recall = 0.0;
        for c in 0..3 {
            let tp = confusion[c][c] as f64;
            let predicted: u64 = (0..3).map(|g| confusion[g][c]).sum();
            let support: u64 = confusion[c].iter().sum();
            let p = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let r = if support == 0 { 0.0 } else { tp / support as f64 };
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            wf1 += support as f64 / total * f1;
            weighted_recall += support as f64 / total * r;
            let s = UncertaintySource::ALL[c];
            ensure((m.precision[&s] - p).abs() < 1e-9, || format!("#{instance} precision {s:?}"))?;
            ensure((m.recall[&s] - r).abs() < 1e-9, || format!("#{instance} recall {s:?}"))?;
        }
        ensure((m.uca - uca).abs() < 1e-9, || format!("#{instance} uca {} vs {uca}", m.uca))?;
        ensure((m.weighted_f1 - wf1).abs() < 1e-9, || format!("#{instance} wF1 {} vs {wf1}", m.weighted_f1))?;
        ensure((m.uca - weighted_recall).abs() < 1e-9, || format!("#{instance} uca != weighted recall"))?;
    }
    Ok("200 matrices within 1e-9".into())
}

/// 130 benchmark cases per dataset (50/50/30), `correct` of them predicted right.
fn table_rows(correct: [usize; 5]) -> Vec<CaseRow> {
    let names = ["HotpotQA", "AmbigQA", "TechQA", "ExpertQA", "ToolBench"];
    let mut rows = Vec::new();
    for (name, &right) in names.iter().zip(&correct) {
        let labels = std::iter::repeat(Doc)
            .take(50)
            .chain(std::iter::repeat(Ambiguity).take(50))
            .chain(std::iter::repeat(Capability).take(30));
        for (i, gold) in labels.enumerate() {
            let wrong = UncertaintySource::ALL[(gold.index() + 1) % 3];
            rows.push(CaseRow {
                repeat: 0,
                case_id: format!("{name}-{i}"),
                dataset: name.to_string(),
                gold,
                predicted: Some(if i < right { gold } else { wrong }),
                samples: vec![],
                inquiry: None,
                channel: None,
                answer: Some("a".into()),
                answered_by: Some("evaluated".into()),
                aq: Some(0.0),
                iq: None,
                error: None,
            });
        }
    }
    rows
}

fn table_fixture() -> Check {
    let rows_for = [
        ("answer", [78usize, 76, 73, 67, 100], [0.600, 0.585, 0.562, 0.515, 0.769], 0.6062),
        ("prompt", [69, 49, 62, 52, 89], [0.531, 0.377, 0.477, 0.400, 0.685], 0.4938),
    ];
    let mut notes = Vec::new();
    for (row, counts, published, expected) in rows_for {
        // The per-dataset counts must reproduce the published per-dataset values.
        for (c, p) in counts.iter().zip(published) {
            let v = *c as f64 / 130.0;
            ensure(((v * 1000.0).round() / 1000.0 - p).abs() < 1e-12, || format!("{row}: {c}/130 does not round to {p}"))?;
        }
        let rows = table_rows(counts);
        let report = MetricsReport::from_repeats(Strategy::Answer, 0, vec![summarize(0, 0, &rows)], rows);
        let got = report.averaged.uca;
        ensure((got - expected).abs() <= 1e-4, || format!("{row}: {got:.5} vs {expected}"))?;
        let rounded_mean = published.iter().sum::<f64>() / 5.0;
        notes.push(format!("{row} {got:.4} (mean of rounded cells {rounded_mean:.4})"));
    }
    Ok(notes.join(", "))
}

fn probe_world(choices: (char, char), coherent: bool, distinct: bool) -> Gateway {
    Gateway::scripted(ScriptedBackend::from_fn(move |req: &ChatRequest| {
        let p = req.last_user_content();
        if p.contains("C: Conducting Chain of Thought") {
            return Some("A".into());
        }
        if p.contains(r#""Choice" : "A/B""#) {
            let c = if req.params.seed == Some(0) { choices.0 } else { choices.1 };
            return Some(format!(r#"{{"Inquiry":"Which vendor manual covers that setting?","Choice":"{c}"}}"#));
        }
        if p.contains("Possible Answers:") {
            return Some(format!(r#"{{"Response":"answer {}"}}"#, req.params.seed.unwrap_or(0)));
        }
        if p.contains(r#""Coherent""#) {
            return Some(format!(r#"{{"Coherent":"{}"}}"#, if coherent { "yes" } else { "no" }));
        }
        if p.contains(r#""Distinct""#) {
            return Some(format!(r#"{{"Distinct":"{}"}}"#, if distinct { "yes" } else { "no" }));
        }
        None
    }))
}

fn plain_case(id: &str, label: UncertaintySource) -> Case {
    let d = Document::new(format!("{id}-d"), "Router", "The router supports firmware updates over USB.", true);
    Case {
        id: id.to_string(),
        dataset: Dataset::TechQA,
        original_query: "How do I update the firmware of my router?".into(),
        actual_query: "How do I update the firmware of my router?".into(),
        gold_documents: vec![d.clone()],
        actual_documents: vec![d],
        clarification: None,
        gold_answer: "Use the USB update.".into(),
        gold_inquiry: None,
        label: Some(label),
        split: Split::Benchmark,
    }
}

fn voting_protocol() -> Check {
    let mut checked = 0;
    for a in UncertaintySource::ALL {
        for b in UncertaintySource::ALL {
            for c in UncertaintySource::ALL {
                let expected = if a == b { a } else { c };
                let got = majority_vote(&[a, b, c]).map_err(|e| e.to_string())?;
                ensure(got == expected, || format!("vote {a:?},{b:?},{c:?} gave {got:?}"))?;
                // Any strict majority wins.
                for s in UncertaintySource::ALL {
                    if [a, b, c].iter().filter(|&&x| x == s).count() >= 2 {
                        ensure(got == s, || format!("vote {a:?},{b:?},{c:?} missed majority"))?;
                    }
                }
                checked += 1;
            }
        }
    }
    let letters = ['A', 'B', 'C'];
    let (model, judge) = (ModelRef::scripted("m"), ModelRef::scripted("j"));
    let config = JudgeConfig::default();
    let mut probed = 0;
    for i in 0..20 {
        let choices = (letters[i % 3], letters[(i / 3) % 3]);
        let (coherent, distinct) = (i % 7 == 3, i % 2 == 0);
        let gw = probe_world(choices, coherent, distinct);
        let case = plain_case(&format!("v{i}"), Doc);
        let j = Judge::new(&gw, &model, &judge, &config)
            .judge_source(&case, Strategy::Answer)
            .map_err(|e| e.to_string())?;
        let log = gw.call_log();
        let probe_calls = log.iter().filter(|r| r.prompt.contains("Possible Answers:")).count();
        let differ = choices.0 != choices.1;
        ensure((probe_calls > 0) == differ, || format!("case {i}: {probe_calls} probe calls, choices {choices:?}"))?;
        let expected = if !differ {
            UncertaintySource::from_letter(choices.0).unwrap()
        } else if coherent {
            Capability
        } else if distinct {
            Ambiguity
        } else {
            Doc
        };
        ensure(j.predicted == expected, || format!("case {i}: predicted {:?}, expected {expected:?}", j.predicted))?;
        probed += differ as usize;
    }
    Ok(format!("{checked} vote inputs; 20 scripted cases, {probed} probed"))
}

fn bm25_brute(docs: &[Document], query: &str) -> Vec<(String, f64)> {
    let tok = |s: &str| -> Vec<String> {
        s.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect()
    };
    let texts: Vec<Vec<String>> = docs.iter().map(|d| tok(&format!("{} {}", d.title, d.body))).collect();
    let n = docs.len() as f64;
    let avg = texts.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut terms = tok(query);
    let mut seen = Vec::new();
    terms.retain(|t| {
        let fresh = !seen.contains(t);
        seen.push(t.clone());
        fresh
    });
    let mut scored = Vec::new();
    for (d, text) in docs.iter().zip(&texts) {
        let mut score = 0.0;
        let mut hit = false;
        for t in &terms {
            let tf = text.iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            hit = true;
            let df = texts.iter().filter(|x| x.contains(t)).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            score += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * text.len() as f64 / avg));
        }
        if hit {
            scored.push((d.doc_id.clone(), score));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored
}

fn bm25_oracle() -> Check {
    let vocab = [
        "river", "bridge", "film", "director", "yoga", "city", "router", "firmware", "award", "novel", "war", "king",
        "song", "album", "river", "team",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut queries = 0;
    for corpus_no in 0..100 {
        let n_docs = rng.gen_range(1..=50);
        let docs: Vec<Document> = (0..n_docs)
            .map(|i| {
                let len = rng.gen_range(1..=12);
                let body: Vec<&str> = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
                Document::new(format!("d{i:02}"), "", body.join(" "), false)
            })
            .collect();
        let corpus = Corpus::ingest(docs.clone()).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let qlen = rng.gen_range(1..=4);
            let query: Vec<&str> = (0..qlen).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
            let query = query.join(" ");
            let expected = bm25_brute(&docs, &query);
            let got = corpus.search(&query, 50).map_err(|e| e.to_string())?;
            ensure(got.len() == expected.len(), || format!("corpus {corpus_no} `{query}`: hit count"))?;
            for (h, (id, score)) in got.iter().zip(&expected) {
                ensure(&h.document.doc_id == id && (h.score - score).abs() < 1e-9, || {
                    format!("corpus {corpus_no} `{query}`: {} {} vs {id} {score}", h.document.doc_id, h.score)
                })?;
            }
            queries += 1;
        }
    }
    Ok(format!("100 corpora, {queries} queries rank- and score-exact"))
}

fn construction() -> Check {
    let raw = RawCase {
        id: "r1".into(),
        dataset: Dataset::HotpotQA,
        query: "Are Edward F. Cline and Floyd Mutrux both screenwriters?".into(),
        gold_documents: vec![
            Document::new("g1", "Edward F. Cline", "Edward F. Cline is a screenwriter.", true),
            Document::new("g2", "Floyd Mutrux", "Floyd Mutrux is an American screenwriter.", true),
        ],
        gold_answer: "yes".into(),
        ambiguous_query: None,
        clarification: None,
    };
    let mut docs = raw.gold_documents.clone();
    docs.extend((0..6).map(|i| Document::new(format!("n{i}"), "", format!("screenwriter trivia {i}"), false)));
    let corpus = Corpus::ingest(docs).map_err(|e| e.to_string())?;
    let (m, j) = (ModelRef::scripted("m"), ModelRef::scripted("j"));
    let script = |on_gold: bool, on_perturbed: bool| {
        Gateway::scripted(ScriptedBackend::from_fn(move |req: &ChatRequest| {
            let p = req.last_user_content();
            if p.contains("Ground Truth Answer") {
                let ok = p.contains("Answer to Grade: yes");
                return Some(format!(r#"{{"Correct":"{}"}}"#, if ok { "yes" } else { "no" }));
            }
            let full = p.contains("Edward F. Cline is a screenwriter") && p.contains("Floyd Mutrux is an American");
            Some(if (full && on_gold) || (!full && on_perturbed) { "yes" } else { "not sure" }.into())
        }))
    };
    let mut outcomes = Vec::new();
    for (on_gold, on_perturbed, expected) in [(false, false, "capability"), (true, false, "document"), (true, true, "excluded")] {
        let gw = script(on_gold, on_perturbed);
        let b = Builder::new(&gw, &m, &j, &corpus, PerturbationPolicy::default());
        let got = match b.classify_raw_case(&raw).map_err(|e| e.to_string())? {
            Classification::Labeled(c) => c.label.map(|l| l.as_str()).unwrap_or("unlabeled").to_string(),
            Classification::Excluded => "excluded".to_string(),
        };
        ensure(got == expected, || format!("script ({on_gold},{on_perturbed}) gave {got}"))?;
        outcomes.push(got);
    }

    // Synthetic pools comfortably above the quota.
    let mut pool = Vec::new();
    for ds in ["HotpotQA", "AmbigQA", "TechQA", "ExpertQA", "ToolBench"] {
        for (label, size) in [(Doc, 70), (Ambiguity, 65), (Capability, 41)] {
            for i in 0..size {
                let mut c = plain_case(&format!("{ds}-{}-{i}", label.as_str()), label);
                c.dataset = Dataset::from_name(ds);
                c.split = Split::Training;
                pool.push(c);
            }
        }
    }
    let (bench, train) = assemble_benchmark(&pool, &QuotaSpec::paper(5)).map_err(|e| e.to_string())?;
    ensure(bench.len() == 650, || format!("benchmark has {} cases", bench.len()))?;
    ensure(bench.len() + train.len() == pool.len(), || "benchmark and training do not cover the pool".into())?;
    let bench_ids: std::collections::HashSet<&str> = bench.iter().map(|c| c.id.as_str()).collect();
    ensure(train.iter().all(|c| !bench_ids.contains(c.id.as_str())), || "benchmark and training overlap".into())?;
    ensure(bench.iter().all(|c| c.split == Split::Benchmark), || "benchmark split not set".into())?;
    Ok(format!("{}; 650 benchmark + {} training", outcomes.join("/"), train.len()))
}

fn confuse(dir: &Path, args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_confuse"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("confuse {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn end_to_end() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e");
    for name in ["bench.jsonl", "docs.jsonl", "script.json", "run.json"] {
        std::fs::copy(fixtures.join(name), dir.join(name)).map_err(|e| e.to_string())?;
    }
    confuse(dir, &["index", "--config", "run.json"])?;
    let bench = read_cases(&dir.join("bench.jsonl")).map_err(|e| e.to_string())?;
    ensure(bench.len() == 12, || format!("{} cases", bench.len()))?;
    for repeats in ["1", "3"] {
        let (a, b) = (format!("a{repeats}.json"), format!("b{repeats}.json"));
        confuse(dir, &["eval", "--config", "run.json", "--repeats", repeats, "--out", &a])?;
        confuse(dir, &["eval", "--config", "run.json", "--repeats", repeats, "--out", &b, "--jobs", "2"])?;
        let (ra, rb) = (std::fs::read(dir.join(&a)).unwrap(), std::fs::read(dir.join(&b)).unwrap());
        ensure(ra == rb, || format!("reports differ with --repeats {repeats}"))?;
    }
    let report: MetricsReport = serde_json::from_slice(&std::fs::read(dir.join("a1.json")).unwrap()).map_err(|e| e.to_string())?;
    ensure(report.errors == 0, || format!("{} failed cases", report.errors))?;
    let row = |id: &str| report.per_case.iter().find(|r| r.case_id == id).cloned().ok_or(format!("no row for {id}"));
    let yoga = row("a-yoga")?;
    let mutrux = row("d-mutrux")?;
    let channel = |r: &CaseRow| serde_json::to_value(r.channel).unwrap();
    ensure(yoga.predicted == Some(Ambiguity) && channel(&yoga) == "user" && yoga.aq == Some(1.0), || {
        format!("yoga: {:?} via {} aq {:?}", yoga.predicted, channel(&yoga), yoga.aq)
    })?;
    ensure(mutrux.predicted == Some(Doc) && channel(&mutrux) == "retrieval" && mutrux.aq == Some(1.0), || {
        format!("mutrux: {:?} via {} aq {:?}", mutrux.predicted, channel(&mutrux), mutrux.aq)
    })?;
    Ok(format!("byte-identical reports; UCA {:.4}, AQ {:.4}", report.averaged.uca, report.averaged.aq))
}

fn entropy() -> Check {
    for (sizes, expected) in [
        (vec![6usize], 0.0),
        (vec![3, 3], std::f64::consts::LN_2),
        (vec![2, 1, 1], 1.0397),
    ] {
        let h = entropy_from_cluster_sizes(&sizes);
        ensure((h - expected).abs() < 1e-4, || format!("{sizes:?}: {h}"))?;
    }
    // The same fixtures through sampling and judge-decided clustering.
    let (m, j) = (ModelRef::scripted("m"), ModelRef::scripted("j"));
    let config = JudgeConfig::default();
    let mut case = plain_case("e", Doc);
    case.dataset = Dataset::HotpotQA;
    for (answers, expected) in [
        (["Paris", "paris", "Paris.", "PARIS"], vec![4usize]),
        (["Paris", "Paris", "Lyon", "Lyon"], vec![2, 2]),
        (["Paris", "paris", "Lyon", "Nice"], vec![2, 1, 1]),
    ] {
        let gw = Gateway::scripted(ScriptedBackend::from_fn(move |req: &ChatRequest| {
            if req.last_user_content().contains(r#""Equivalent""#) {
                return Some(r#"{"Equivalent":"no"}"#.into());
            }
            let i = req.params.seed.map(|s| s as usize - 200)?;
            Some(answers[i].to_string())
        }));
        let est = Judge::new(&gw, &m, &j, &config)
            .estimate_answer_entropy(&case, Conditioning::XD, 4)
            .map_err(|e| e.to_string())?;
        ensure(est.cluster_sizes == expected, || format!("{answers:?}: clusters {:?}", est.cluster_sizes))?;
    }
    Ok(format!("0, ln2, {:.4} nats", entropy_from_cluster_sizes(&[2, 1, 1])))
}

/// Needs `CONFUSE_LIVE_CONFIG` pointing at a run config whose `paths.bench`
/// holds a labeled subset (10 per source).
fn live() -> Option<Check> {
    let path = std::env::var("CONFUSE_LIVE_CONFIG").ok()?;
    Some((|| {
        let config = RunConfig::load(Path::new(&path)).map_err(|e| e.to_string())?;
        let bench_path = config.path("bench").ok_or("paths.bench is required")?;
        let bench = read_cases(bench_path).map_err(|e| e.to_string())?;
        let index = match config.path("index") {
            Some(p) => Some(Corpus::load(p).map_err(|e| e.to_string())?),
            None => None,
        };
        let gw = config.gateway().map_err(|e| e.to_string())?;
        let user_sim = config.user_sim().map_err(|e| e.to_string())?;
        let setup = EvalSetup {
            gateway: &gw,
            evaluated: config.evaluated().map_err(|e| e.to_string())?,
            strong: config.strong().map_err(|e| e.to_string())?,
            judge: config.judge().map_err(|e| e.to_string())?,
            user_sim: &user_sim,
            corpus: index.as_ref(),
            judge_config: config.judge_config(),
            resolve_config: config.resolve_config(),
        };
        let mut uca = BTreeMap::new();
        for strategy in [Strategy::Prompt, Strategy::Answer] {
            let report = run_eval(&setup, &bench, strategy, 1, config.seed).map_err(|e| e.to_string())?;
            uca.insert(strategy.to_string(), report.averaged.uca);
        }
        let (p, a) = (uca["prompt"], uca["answer"]);
        ensure(a >= p, || format!("answer UCA {a:.4} < prompt UCA {p:.4}"))?;
        Ok(format!("answer {a:.4} >= prompt {p:.4}"))
    })())
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Check)> = vec![
        ("metric oracle equivalence", Duration::from_secs(5), metric_oracle),
        ("published aggregate replay", Duration::from_secs(1), table_fixture),
        ("voting and fallback protocol", Duration::from_secs(5), voting_protocol),
        ("bm25 oracle", Duration::from_secs(10), bm25_oracle),
        ("construction invariants", Duration::from_secs(5), construction),
        ("end-to-end determinism", Duration::from_secs(10), end_to_end),
        ("entropy estimator", Duration::from_secs(1), entropy),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    match live() {
        None => println!("SKIP  live directional check: set CONFUSE_LIVE_CONFIG to run"),
        Some(Ok(detail)) => println!("PASS  live directional check: {detail}"),
        Some(Err(why)) => {
            failed += 1;
            println!("FAIL  live directional check: {why}");
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
