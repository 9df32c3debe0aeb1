use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use confuse_core::bench::{assemble_benchmark, Builder, QuotaSpec, RawCase};
use confuse_core::config::RunConfig;
use confuse_core::dpo::{serve_environment, write_pairs, Environment, Labeler};
use confuse_core::evaluator::{run_eval, EvalSetup, MetricsReport};
use confuse_core::judge::Judge;
use confuse_core::model::{read_cases, read_documents, read_jsonl, validate_case, write_cases, write_jsonl, Case, Judgment, Strategy};
use confuse_core::resolver::Resolver;
use confuse_core::retrieval::Corpus;
use confuse_core::{Error, Result};

/// Diagnose, resolve and evaluate uncertainty sources of retrieval-augmented LLMs.
#[derive(Parser, Debug)]
#[command(name = "confuse", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Validate configuration and inputs without calling any model.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a BM25 index from a document JSONL file.
    Index {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label raw cases and split them into benchmark and training sets.
    Build {
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Index file.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Quota JSON; the five-dataset default when absent.
        #[arg(long)]
        quota: Option<PathBuf>,
        #[arg(long)]
        out_bench: Option<PathBuf>,
        #[arg(long)]
        out_train: Option<PathBuf>,
    },
    /// Predict the uncertainty source of every case.
    Judge {
        #[arg(long)]
        bench: Option<PathBuf>,
        #[arg(long, default_value = "answer")]
        strategy: Strategy,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one interaction per judged case and answer.
    Resolve {
        #[arg(long)]
        bench: Option<PathBuf>,
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Judge, resolve and score a benchmark into a metrics report.
    Eval {
        #[arg(long)]
        bench: Option<PathBuf>,
        #[arg(long, default_value = "answer")]
        strategy: Strategy,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect seed preference pairs over training cases.
    DpoSeed {
        #[arg(long)]
        cases: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the labeling environment over HTTP.
    ServeEnv {
        #[arg(long)]
        cases: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Print a metrics report as a table.
    Report {
        #[command(flatten)]
        input: ReportInput,
    },
}

#[derive(Args, Debug)]
struct ReportInput {
    /// Report JSON written by `eval`.
    #[arg(long)]
    report: Option<PathBuf>,
}

struct Ctx {
    config: Option<RunConfig>,
    dry_run: bool,
}

impl Ctx {
    fn config(&self) -> Result<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config".into()))
    }

    /// A flag value, else the config's `paths.<name>`.
    fn path(&self, flag: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p.clone());
        }
        self.config
            .as_ref()
            .and_then(|c| c.path(name))
            .map(Path::to_path_buf)
            .ok_or_else(|| Error::Config(format!("missing --{} (or paths.{name} in the config)", name.replace('_', "-"))))
    }

    fn optional_path(&self, flag: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        self.path(flag, name).ok()
    }

    /// Dry runs stop after configuration and inputs are checked.
    fn stop_if_dry(&self, what: &str) -> Result<bool> {
        if self.dry_run {
            if let Some(c) = &self.config {
                c.check_backend()?;
            }
            println!("dry run ok: {what}");
        }
        Ok(self.dry_run)
    }
}

fn load_bench(path: &Path) -> Result<Vec<Case>> {
    let cases = read_cases(path).map_err(|e| e.context(format!("reading {}", path.display())))?;
    for case in &cases {
        let problems = validate_case(case);
        if !problems.is_empty() {
            return Err(Error::Parameter(format!("case `{}`: {}", case.id, problems.join("; "))));
        }
    }
    Ok(cases)
}

fn load_index(path: Option<PathBuf>) -> Result<Option<Corpus>> {
    path.map(|p| Corpus::load(&p).map_err(|e| e.context(format!("loading index {}", p.display()))))
        .transpose()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parameter(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Aborts when more than a tenth of the items failed.
fn check_failures(failed: usize, total: usize, what: &str) -> Result<()> {
    if failed * 10 > total {
        return Err(Error::Parameter(format!("{failed} of {total} {what} failed")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let ctx = Ctx {
        config,
        dry_run: cli.dry_run,
    };
    match &cli.command {
        Command::Index { corpus, out } => {
            let corpus_path = ctx.path(corpus, "corpus")?;
            let out = ctx.path(out, "index")?;
            let documents = read_documents(&corpus_path)?;
            let params = match &ctx.config {
                Some(c) => c.bm25()?,
                None => Default::default(),
            };
            let index = Corpus::ingest_with(documents, params)?;
            if ctx.stop_if_dry(&format!("{} documents", index.len()))? {
                return Ok(());
            }
            index.save(&out)?;
            println!("indexed {} documents into {}", index.len(), out.display());
        }
        Command::Build {
            raw,
            corpus,
            quota,
            out_bench,
            out_train,
        } => {
            let config = ctx.config()?;
            let raws: Vec<RawCase> = read_jsonl(&ctx.path(raw, "raw")?)?;
            let index = Corpus::load(&ctx.path(corpus, "index")?)?;
            let quota = match ctx.optional_path(quota, "quota") {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => QuotaSpec::paper(config.seed),
            };
            let (out_bench, out_train) = (ctx.path(out_bench, "bench")?, ctx.path(out_train, "train")?);
            let (model, judge) = (config.evaluated()?, config.judge()?);
            if ctx.stop_if_dry(&format!("{} raw cases", raws.len()))? {
                return Ok(());
            }
            let gateway = config.gateway()?;
            let mut builder = Builder::new(&gateway, model, judge, &index, config.perturbation());
            builder.sampling = config.builder_sampling();
            let report = builder.build(&raws);
            for (id, err) in &report.failures {
                tracing::warn!(case = %id, error = %err, "construction failed");
            }
            let (bench, train) = assemble_benchmark(&report.cases, &quota)?;
            write_cases(&out_bench, &bench)?;
            write_cases(&out_train, &train)?;
            println!(
                "{} labeled, {} excluded, {} failed; {} benchmark, {} training",
                report.cases.len(),
                report.excluded,
                report.failures.len(),
                bench.len(),
                train.len()
            );
        }
        Command::Judge { bench, strategy, out } => {
            let config = ctx.config()?;
            let cases = load_bench(&ctx.path(bench, "bench")?)?;
            let out = ctx.path(out, "judgments")?;
            let (model, judge) = (config.evaluated()?, config.judge()?);
            if ctx.stop_if_dry(&format!("{} cases", cases.len()))? {
                return Ok(());
            }
            let gateway = config.gateway()?;
            let jc = config.judge_config();
            let judge = Judge::new(&gateway, model, judge, &jc);
            let results: Vec<Result<Judgment>> = cases.par_iter().map(|c| judge.judge_source(c, *strategy)).collect();
            let mut judgments = Vec::new();
            for r in results {
                match r {
                    Ok(j) => judgments.push(j),
                    Err(e) => tracing::warn!(error = %e, "judgment failed"),
                }
            }
            check_failures(cases.len() - judgments.len(), cases.len(), "judgments")?;
            write_jsonl(&out, &judgments)?;
            println!("{} judgments written to {}", judgments.len(), out.display());
        }
        Command::Resolve {
            bench,
            judgments,
            index,
            out,
        } => {
            let config = ctx.config()?;
            let cases = load_bench(&ctx.path(bench, "bench")?)?;
            let judgments: Vec<Judgment> = read_jsonl(&ctx.path(judgments, "judgments")?)?;
            let index = load_index(ctx.optional_path(index, "index"))?;
            let out = ctx.path(out, "transcripts")?;
            let (model, user_sim) = (config.evaluated()?, config.user_sim()?);
            let by_id: HashMap<&str, &Case> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
            if let Some(j) = judgments.iter().find(|j| !by_id.contains_key(j.case_id.as_str())) {
                return Err(Error::NotFound(format!("judged case `{}` is not in the benchmark", j.case_id)));
            }
            if ctx.stop_if_dry(&format!("{} judgments", judgments.len()))? {
                return Ok(());
            }
            let gateway = config.gateway()?;
            let rc = config.resolve_config();
            let resolver = Resolver {
                gateway: &gateway,
                model,
                user_sim: &user_sim,
                corpus: index.as_ref(),
                config: &rc,
            };
            let results: Vec<_> = judgments.par_iter().map(|j| resolver.resolve(by_id[j.case_id.as_str()], j)).collect();
            let mut transcripts = Vec::new();
            for r in results {
                match r {
                    Ok(t) => transcripts.push(t),
                    Err(e) => tracing::warn!(error = %e, "resolution failed"),
                }
            }
            check_failures(judgments.len() - transcripts.len(), judgments.len(), "resolutions")?;
            write_jsonl(&out, &transcripts)?;
            println!("{} transcripts written to {}", transcripts.len(), out.display());
        }
        Command::Eval {
            bench,
            strategy,
            repeats,
            index,
            out,
        } => {
            let config = ctx.config()?;
            let cases = load_bench(&ctx.path(bench, "bench")?)?;
            let index = load_index(ctx.optional_path(index, "index"))?;
            let out = ctx.path(out, "report")?;
            let repeats = repeats.unwrap_or(config.strategy.repeats);
            let (evaluated, strong, judge, user_sim) =
                (config.evaluated()?, config.strong()?, config.judge()?, config.user_sim()?);
            if ctx.stop_if_dry(&format!("{} cases x {repeats} repeats", cases.len()))? {
                return Ok(());
            }
            let gateway = config.gateway()?;
            let setup = EvalSetup {
                gateway: &gateway,
                evaluated,
                strong,
                judge,
                user_sim: &user_sim,
                corpus: index.as_ref(),
                judge_config: config.judge_config(),
                resolve_config: config.resolve_config(),
            };
            let report = run_eval(&setup, &cases, *strategy, repeats, config.seed)?;
            write_json(&out, &report)?;
            print_report(&report);
        }
        Command::DpoSeed { cases, index, out } => {
            let config = ctx.config()?;
            let cases = load_bench(&ctx.path(cases, "train")?)?;
            let index = load_index(ctx.optional_path(index, "index"))?;
            let out = ctx.path(out, "pairs")?;
            let (model, judge, user_sim, generators) =
                (config.evaluated()?, config.judge()?, config.user_sim()?, config.generators()?);
            if ctx.stop_if_dry(&format!("{} cases, {} generators", cases.len(), generators.len()))? {
                return Ok(());
            }
            let gateway = config.gateway()?;
            let rc = config.resolve_config();
            let labeler = Labeler {
                gateway: &gateway,
                model,
                judge,
                user_sim: &user_sim,
                corpus: index.as_ref(),
                resolve_config: &rc,
            };
            let pairs = labeler.collect_seed_pairs(&cases, generators)?;
            write_pairs(&out, &pairs)?;
            println!("{} pairs written to {}", pairs.len(), out.display());
        }
        Command::ServeEnv { cases, index, bind } => {
            let config = ctx.config()?;
            let cases = load_bench(&ctx.path(cases, "train")?)?;
            let index = load_index(ctx.optional_path(index, "index"))?;
            let (model, judge, user_sim) = (config.evaluated()?.clone(), config.judge()?.clone(), config.user_sim()?);
            if ctx.stop_if_dry(&format!("{} cases", cases.len()))? {
                return Ok(());
            }
            let mut env = Environment::new(
                Arc::new(config.gateway()?),
                model,
                judge,
                user_sim,
                index.map(Arc::new),
                cases,
            )?;
            env.resolve_config = config.resolve_config();
            let handle = serve_environment(*bind, Arc::new(env))?;
            println!("serving on http://{}", handle.addr);
            handle.wait();
        }
        Command::Report { input } => {
            let path = ctx.path(&input.report, "report")?;
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let report: MetricsReport =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            print_report(&report);
        }
    }
    Ok(())
}

fn print_report(report: &MetricsReport) {
    println!(
        "strategy {} | repeats {} | seed {} | errors {}",
        report.strategy, report.repeats, report.seed, report.errors
    );
    println!("{:<12} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}", "dataset", "AQ", "UCA", "IQ", "P", "R", "wF1");
    let average = "average".to_string();
    let rows = report.per_dataset.iter().chain(std::iter::once((&average, &report.averaged)));
    for (name, m) in rows {
        let p = m.precision.values().sum::<f64>() / 3.0;
        let r = m.recall.values().sum::<f64>() / 3.0;
        println!(
            "{:<12} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            name, m.aq, m.uca, m.iq, p, r, m.weighted_f1
        );
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
