use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use factline::{with_data_dir, Service};
use factline_core::harness::{generate_corpus, PropagationSpec, Templates};
use factline_core::orchestrator::audit::{chain_path, read_chain_file};
use factline_core::orchestrator::{verify_audit_chain, AppConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "factline", version, about = "Misinformation classification, evidence retrieval and correction")]
struct Cli {
    /// JSON config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Holds the index, audit chains and ledger unless the config names
    /// other locations.
    #[arg(long, global = true, default_value = "factline-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add documents from a JSON Lines file ("-" reads stdin).
    Ingest { file: PathBuf },
    /// Print index statistics.
    IndexStats,
    /// Classify a claim without running the rest of the pipeline.
    Classify { text: String },
    /// Run the full pipeline on a claim and print its report.
    Check {
        text: String,
        /// RFC 3339 receipt time; defaults to the pinned clock or now.
        #[arg(long)]
        received_at: Option<String>,
    },
    /// Print the propagation graph around a document.
    Lineage {
        doc_id: String,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Recheck the stored audit chain of a claim.
    VerifyAudit { claim_id: String },
    /// Serve the HTTP API.
    Serve,
    /// Write a seeded synthetic corpus, claims and ground truth.
    Generate {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trees: usize,
        #[arg(long, default_value_t = 5)]
        docs_per_tree: usize,
        #[arg(long, default_value_t = 0.05)]
        mutation_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_config(cli: &Cli) -> anyhow::Result<AppConfig> {
    let cfg = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    Ok(with_data_dir(cfg, &cli.data_dir))
}

fn parse_time(raw: Option<&str>) -> anyhow::Result<Option<DateTime<Utc>>> {
    raw.map(|s| {
        DateTime::parse_from_rfc3339(s)
            .map(|t| t.with_timezone(&Utc))
            .with_context(|| format!("bad timestamp {s}"))
    })
    .transpose()
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Command::Generate { seed, trees, docs_per_tree, mutation_rate, out } = &cli.command {
        let spec = PropagationSpec::new(*seed, *trees, *docs_per_tree).with_mutation_rate(*mutation_rate);
        let corpus = generate_corpus(&spec, &Templates::builtin())?;
        corpus.write_dir(out)?;
        eprintln!(
            "wrote {} documents and {} claims to {}",
            corpus.documents.len(),
            corpus.claims.len(),
            out.display()
        );
        return Ok(ExitCode::SUCCESS);
    }

    let cfg = load_config(&cli)?;
    if let Command::VerifyAudit { claim_id } = &cli.command {
        let dir = cfg.pipeline.audit_dir.as_deref().expect("data dir fills audit_dir");
        let path = chain_path(dir, claim_id);
        let chain = read_chain_file(&path).with_context(|| format!("reading {}", path.display()))?;
        let check = verify_audit_chain(&chain);
        print_json(&serde_json::json!({ "claim_id": claim_id, "records": chain.len(), "check": check }))?;
        return Ok(if check.valid { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }

    let svc = Service::open(&cfg)?;
    match cli.command {
        Command::Ingest { file } => print_json(&svc.ingest_jsonl(&read_input(&file)?)?)?,
        Command::IndexStats => print_json(&svc.orchestrator().index().read().stats())?,
        Command::Classify { text } => {
            let claim = svc.claim(&text, None);
            print_json(&svc.orchestrator().classifier().classify(&claim)?)?;
        }
        Command::Check { text, received_at } => {
            let claim = svc.claim(&text, parse_time(received_at.as_deref())?);
            let dir = cfg.pipeline.audit_dir.as_deref().expect("data dir fills audit_dir");
            if chain_path(dir, &claim.id).exists() {
                bail!("claim {} already has an audit chain in {}", claim.id, dir.display());
            }
            print_json(&svc.orchestrator().run_pipeline(claim)?)?;
        }
        Command::Lineage { doc_id, tau } => print_json(&svc.orchestrator().lineage(&doc_id, tau)?)?,
        Command::Serve => serve(svc, &cfg.server.bind)?,
        Command::VerifyAudit { .. } | Command::Generate { .. } => unreachable!("handled above"),
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(svc: Service, bind: &str) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, factline::api::router(Arc::new(svc)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
