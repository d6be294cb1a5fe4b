use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use kgtriage_core::curation::Verdict;
use kgtriage_core::ingestion::Document;

use crate::config::{ServiceConfig, DATA_DIR_ENV};
use crate::service::{Service, ServiceError};
use crate::{render, render_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kgtriage", version, about = "Knowledge-graph diagnostic triage")]
struct Cli {
    /// Service configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data directory; overrides the configuration file.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest every .txt/.md file in a directory.
    Ingest {
        corpus_dir: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// One-shot diagnosis.
    Diagnose {
        /// Comma-separated symptom ids, labels or aliases.
        #[arg(long, value_delimiter = ',', required_unless_present = "text")]
        symptoms: Vec<String>,
        /// Free-text complaint, normalized through the lexicon.
        #[arg(long, conflicts_with = "symptoms")]
        text: Option<String>,
        #[arg(long, default_value = "query")]
        query_id: String,
    },
    /// Print the graph export document.
    ExportGraph,
    /// Inspect or decide review items.
    Review {
        #[command(subcommand)]
        action: ReviewCommand,
    },
    /// Run a scripted dialog session and print it.
    Session {
        #[arg(long)]
        intake: String,
        /// Symptoms to answer "yes" to; every other question is answered "no".
        #[arg(long, value_delimiter = ',')]
        present: Vec<String>,
    },
    /// Run the HTTP service.
    Serve,
    /// Graph and queue counters.
    Stats,
}

#[derive(Debug, Subcommand)]
enum ReviewCommand {
    List {
        /// Include decided items.
        #[arg(long)]
        all: bool,
    },
    Approve(VerdictArgs),
    Reject(VerdictArgs),
}

#[derive(Debug, Args)]
struct VerdictArgs {
    item: String,
    #[arg(long)]
    reviewer: String,
    #[arg(long)]
    revision: u64,
    #[arg(long)]
    note: Option<String>,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::BadRequest(m) => Failure::Usage(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_DATA
        }
    }
}

fn load_config(cli: &Cli) -> Result<ServiceConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ServiceConfig::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => ServiceConfig::default(),
    }
    .with_env();
    if let Some(dir) = &cli.data_dir {
        cfg.data_dir = dir.clone();
    }
    Ok(cfg)
}

fn read_corpus(dir: &Path) -> Result<Vec<Document>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|x| x.to_str()), Some("txt" | "md")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("doc").to_string();
            Ok(Document {
                id: stem,
                text,
                source: p.display().to_string(),
            })
        })
        .collect()
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load_config(&cli)?;
    let emit = |out: &mut dyn Write, body: String| {
        out.write_all(body.as_bytes()).map_err(|e| Failure::Data(e.to_string()))
    };
    if let Command::Serve = cli.command {
        let svc = Arc::new(Service::open(cfg)?);
        return crate::serve(svc).map_err(|e| Failure::Data(e.to_string()));
    }
    let svc = Service::open(cfg)?;
    match cli.command {
        Command::Ingest { corpus_dir, lexicon, patterns } => {
            let lexicon = lexicon.map(|p| read_file(&p)).transpose()?;
            let patterns = patterns.map(|p| read_file(&p)).transpose()?;
            svc.set_resources(lexicon.as_deref(), patterns.as_deref())?;
            let docs = read_corpus(&corpus_dir)?;
            emit(out, render_json(&svc.ingest(&docs)?))
        }
        Command::Diagnose { symptoms, text, query_id } => {
            let query = match text {
                Some(t) => svc.query_from_text(&query_id, &t)?,
                None => svc.query_from_symptoms(&query_id, &symptoms)?,
            };
            emit(out, render(&svc.diagnose(&query)?))
        }
        Command::ExportGraph => emit(out, svc.export_graph()?),
        Command::Review { action } => match action {
            ReviewCommand::List { all } => emit(out, render_json(&svc.review_queue(all))),
            ReviewCommand::Approve(a) => {
                emit(out, render_json(&svc.verdict(&a.item, Verdict::Approve, &a.reviewer, a.revision, a.note)?))
            }
            ReviewCommand::Reject(a) => {
                emit(out, render_json(&svc.verdict(&a.item, Verdict::Reject, &a.reviewer, a.revision, a.note)?))
            }
        },
        Command::Session { intake, present } => {
            let present = svc.query_from_symptoms("script", &present)?.symptom_ids;
            let mut session = svc.start_session(&intake)?;
            while let Some(q) = session.pending_question.clone() {
                session = svc.answer(&session.session_id, &q, present.contains(&q))?;
            }
            emit(out, render_json(&session))
        }
        Command::Stats => emit(out, render_json(&svc.stats()?)),
        Command::Serve => unreachable!("handled above"),
    }
}
