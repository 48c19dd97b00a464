use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use vismanip_cli::chat::HttpChatClient;
use vismanip_cli::load_spec;
use vismanip_cli::server::{self, AppState};
use vismanip_core::dataset::{self, GenConfig, Paraphraser, Vocabulary};
use vismanip_core::eval::{evaluate, EvalOptions, FilterDenominator, TaskMatch};
use vismanip_core::session::SessionStore;
use vismanip_core::translate::{QueryContext, RemoteConfig, RemoteTranslator, RulesTranslator, Translator};
use vismanip_core::{apply_all, parse_task_text, plan, ChartState, PlanPolicy};

#[derive(Parser)]
#[command(
    name = "vismanip",
    version,
    about = "Answer chart questions by manipulating the chart"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Rules,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a query into a task.
    Translate {
        query: String,
        /// Sample name or chart spec file.
        #[arg(long, default_value = "covid")]
        spec: String,
        #[arg(long, value_enum, default_value = "rules")]
        backend: BackendArg,
        #[arg(long, default_value = "en-US")]
        locale: String,
    },
    /// Print the manipulation plan for a task or a query.
    Plan {
        #[arg(long, default_value = "covid")]
        spec: String,
        /// Task in grammar form.
        #[arg(long, conflicts_with = "query", required_unless_present = "query")]
        task: Option<String>,
        #[arg(long)]
        query: Option<String>,
    },
    /// Write one SVG per keyframe of the answer to a query.
    Render {
        query: String,
        #[arg(long, default_value = "covid")]
        spec: String,
        #[arg(long, default_value = "frames")]
        out_dir: PathBuf,
    },
    /// Generate a query/task dataset as JSON lines.
    GenDataset {
        /// JSON generation config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Paraphrase queries through the configured chat endpoint.
        #[arg(long)]
        paraphrase: bool,
        /// Directory of topic vocabularies instead of the bundled ones.
        #[arg(long)]
        vocab_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        total: Option<usize>,
    },
    /// Score a translator on a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "rules")]
        backend: BackendArg,
        #[arg(long, value_enum, default_value = "markdown")]
        report: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only score the first N pairs.
        #[arg(long)]
        limit: Option<usize>,
        /// Count task kinds of one category as equal.
        #[arg(long)]
        category_match: bool,
        /// Divide matched filters by the gold count only.
        #[arg(long)]
        gold_denominator: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, value_enum, default_value = "rules")]
        backend: BackendArg,
        /// Sessions kept before the least recently used is dropped.
        #[arg(long, default_value_t = 256)]
        capacity: usize,
    },
    /// Print a bundled sample chart spec.
    SampleSpec {
        #[arg(default_value = "covid")]
        name: String,
    },
}

fn remote_config() -> anyhow::Result<RemoteConfig> {
    RemoteConfig::from_env().context("remote backend needs VISMANIP_LLM_ENDPOINT")
}

fn translator(backend: BackendArg) -> anyhow::Result<Arc<dyn Translator>> {
    Ok(match backend {
        BackendArg::Rules => Arc::new(RulesTranslator::default()),
        BackendArg::Remote => Arc::new(RemoteTranslator {
            client: HttpChatClient,
            config: remote_config()?,
        }),
    })
}

/// Write to stdout, treating a closed pipe as success.
fn emit(text: &str) -> anyhow::Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn main() -> anyhow::Result<()> {
    let level = std::env::var("VISMANIP_LOG")
        .ok()
        .and_then(|l| l.parse().ok())
        .unwrap_or(tracing::Level::INFO);
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Translate {
            query,
            spec,
            backend,
            locale,
        } => {
            let ctx = QueryContext::new(load_spec(&spec)?).with_locale(locale);
            let report = translator(backend)?.translate(&query, &ctx)?;
            print_json(&report)
        }
        Command::Plan { spec, task, query } => {
            let spec = Arc::new(load_spec(&spec)?);
            let task = match (task, query) {
                (Some(t), _) => parse_task_text(&t)?,
                (None, Some(q)) => {
                    RulesTranslator::default()
                        .translate(&q, &QueryContext::new(spec.clone()))?
                        .task
                }
                (None, None) => bail!("give --task or --query"),
            };
            let steps = plan(&task, &ChartState::initial(spec), &PlanPolicy::default())?;
            print_json(&steps)
        }
        Command::Render { query, spec, out_dir } => {
            let spec = Arc::new(load_spec(&spec)?);
            let report = RulesTranslator::default().translate(&query, &QueryContext::new(spec.clone()))?;
            let state = ChartState::initial(spec);
            let steps = plan(&report.task, &state, &PlanPolicy::default())?;
            let frames = apply_all(&steps, &state)?;
            std::fs::create_dir_all(&out_dir)?;
            for f in &frames {
                std::fs::write(out_dir.join(format!("frame-{:02}.svg", f.index)), &f.svg)?;
            }
            std::fs::write(out_dir.join("plan.json"), serde_json::to_string_pretty(&steps)?)?;
            emit(&format!(
                "{}: {} keyframes in {}",
                report.raw,
                frames.len(),
                out_dir.display()
            ))
        }
        Command::GenDataset {
            config,
            out,
            paraphrase,
            vocab_dir,
            seed,
            total,
        } => {
            let mut cfg = match config {
                Some(p) => {
                    GenConfig::from_json_str(&std::fs::read_to_string(&p).with_context(|| p.display().to_string())?)?
                }
                None => GenConfig::default(),
            };
            cfg.paraphrase |= paraphrase;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = total {
                cfg.total_pairs = t;
            }
            let vocab = match vocab_dir {
                Some(d) => Vocabulary::load_dir(&d)?,
                None => Vocabulary::bundled(),
            };
            let remote = if cfg.paraphrase { RemoteConfig::from_env() } else { None };
            let client = HttpChatClient;
            let paraphraser = remote.map(|config| Paraphraser {
                config,
                client: &client,
            });
            let generated = dataset::generate_with(&cfg, &vocab, paraphraser.as_ref())?;
            if let Some(reason) = &generated.fallback {
                tracing::warn!("paraphrasing skipped: {reason}");
            }
            let mut w = BufWriter::new(File::create(&out).with_context(|| out.display().to_string())?);
            dataset::write_jsonl(&generated.pairs, &mut w)?;
            w.flush()?;
            print_json(&dataset::dataset_stats(&generated.pairs))
        }
        Command::Evaluate {
            dataset: path,
            backend,
            report,
            out,
            limit,
            category_match,
            gold_denominator,
        } => {
            let mut pairs = dataset::read_jsonl(BufReader::new(
                File::open(&path).with_context(|| path.display().to_string())?,
            ))?;
            if let Some(n) = limit {
                pairs.truncate(n);
            }
            let options = EvalOptions {
                task_match: if category_match {
                    TaskMatch::Category
                } else {
                    TaskMatch::Kind
                },
                filter_denominator: if gold_denominator {
                    FilterDenominator::Gold
                } else {
                    FilterDenominator::Max
                },
            };
            let result = evaluate(&pairs, translator(backend)?.as_ref(), options);
            let text = match report {
                ReportFormat::Json => serde_json::to_string_pretty(&result)?,
                ReportFormat::Markdown => result.to_markdown(),
            };
            match out {
                Some(p) => std::fs::write(&p, text)?,
                None => emit(&text)?,
            }
            Ok(())
        }
        Command::Serve {
            port,
            host,
            backend,
            capacity,
        } => {
            let state = AppState {
                store: Arc::new(SessionStore::new(capacity, PlanPolicy::default())),
                translator: translator(backend)?,
            };
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            tokio::runtime::Runtime::new()?.block_on(server::serve(state, addr))
        }
        Command::SampleSpec { name } => match vismanip_core::demo::sample(&name) {
            Some(spec) => print_json(&spec.to_json()),
            None => bail!(
                "unknown sample `{name}`; try one of {}",
                vismanip_core::demo::SAMPLES.join(", ")
            ),
        },
    }
}
