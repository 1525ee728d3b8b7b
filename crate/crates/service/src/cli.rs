//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use asknearby_core::eval::ablation::{
    engine_for, run_recommend_ablation, run_retrieval_ablation, run_suite, RecommendVariant, RetrievalVariant,
};
use asknearby_core::eval::synth::{synth_generate, Dataset, SynthParams};
use asknearby_core::{EngineConfig, Exec};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::app::{App, QueryInput, QueryResponse, RecommendInput, RecommendResponse};
use crate::config::AppConfig;
use crate::http;
use crate::ingest::IngestReport;

#[derive(Debug, Parser)]
#[command(name = "asknearby", version, about = "Neighborhood-scale retrieval and recommendation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSON Lines file and publish it as the next kb version.
    Ingest { file: PathBuf },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Answer a free-text local question.
    Query {
        text: String,
        #[arg(long, allow_negative_numbers = true)]
        lat: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lon: Option<f64>,
        /// Local time, "YYYY-MM-DD HH:MM:SS".
        #[arg(long)]
        time: Option<String>,
    },
    /// Rank nearby items for a user.
    Recommend {
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
        #[arg(long)]
        user: Option<String>,
        #[arg(long, default_value_t = crate::app::DEFAULT_K)]
        k: usize,
        #[arg(long)]
        time: Option<String>,
    },
    /// Run ablations on a synthetic benchmark and print the JSON report.
    Eval {
        /// Dataset directory (or its dataset.json). Generated from --seed when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// suite (every variant), a retrieval variant (all, graph_off, geo_off,
        /// vector_only) or a recommendation variant (s+p+sem, s+sem, s+p, s_only).
        #[arg(long, default_value = "suite")]
        ablation: String,
        /// Include wall-clock runtimes (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Write a seeded synthetic benchmark to a directory.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        users: Option<usize>,
    },
}

pub type CliResult = Result<(), String>;

fn load_config(cli: &Cli) -> Result<AppConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p).map_err(|e| e.to_string())?,
        None => AppConfig::default(),
    };
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = d.clone();
    }
    Ok(cfg)
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    writeln!(out, "{text}").map_err(|e| e.to_string())
}

fn print_ingest(out: &mut dyn Write, r: &IngestReport) -> std::io::Result<()> {
    writeln!(out, "accepted {}, rejected {}, version {}", r.accepted, r.rejected, r.version)?;
    for reason in &r.reasons {
        writeln!(out, "  rejected: {reason}")?;
    }
    Ok(())
}

fn print_query(out: &mut dyn Write, r: &QueryResponse) -> std::io::Result<()> {
    if let Some(loc) = &r.plan.resolved {
        writeln!(out, "location: {}", loc.name)?;
    }
    for (i, it) in r.items.iter().enumerate() {
        let dist = it.distance_km.map(|d| format!("{d:.2} km")).unwrap_or_else(|| "-".into());
        writeln!(out, "{:>2}. [{}] {}  ({dist}, score {:.3})", i + 1, it.id, it.title, it.score)?;
    }
    writeln!(out)?;
    writeln!(out, "{}", r.answer)
}

fn print_recommend(out: &mut dyn Write, r: &RecommendResponse) -> std::io::Result<()> {
    for (i, it) in r.items.iter().enumerate() {
        writeln!(
            out,
            "{:>2}. [{}] {}  psi {:.4}  (sem {:.3}, dist {:.3}, pop {:.3}; {:.2} km)",
            i + 1,
            it.id,
            it.title,
            it.psi,
            it.f_sem,
            it.f_dist,
            it.f_pop,
            it.distance_km
        )?;
    }
    Ok(())
}

fn open_loaded(cfg: AppConfig) -> Result<App, String> {
    let app = App::open(cfg).map_err(|e| e.to_string())?;
    if app.engine().is_none() {
        return Err(format!("no knowledge base in {}; run `asknearby ingest <file>` first", app.config().data_dir.display()));
    }
    Ok(app)
}

fn load_dataset(path: Option<&Path>, seed: u64) -> Result<Dataset, String> {
    match path {
        Some(p) => {
            let dir = if p.is_file() { p.parent().unwrap_or(Path::new(".")) } else { p };
            Dataset::read_dir(dir).map_err(|e| e.to_string())
        }
        None => synth_generate(seed, SynthParams::default()).map_err(|e| e.to_string()),
    }
}

fn eval(out: &mut dyn Write, cfg: EngineConfig, dataset: Option<&Path>, seed: u64, ablation: &str, timing: bool) -> CliResult {
    let data = load_dataset(dataset, seed)?;
    let engine = engine_for(&data, cfg, Exec::default()).map_err(|e| e.to_string())?;
    if ablation == "suite" {
        let suite = run_suite(&engine, &data, timing).map_err(|e| e.to_string())?;
        return emit(out, &suite);
    }
    if let Some(v) = RetrievalVariant::parse(ablation) {
        let report = run_retrieval_ablation(&engine, &data, v, timing).map_err(|e| e.to_string())?;
        return emit(out, &report);
    }
    if let Some(v) = RecommendVariant::parse(ablation) {
        let report = run_recommend_ablation(&engine, &data, v, timing).map_err(|e| e.to_string())?;
        return emit(out, &report);
    }
    let names: Vec<&str> = RetrievalVariant::ALL.iter().map(|v| v.name()).chain(RecommendVariant::ALL.iter().map(|v| v.name())).collect();
    Err(format!("unknown ablation {ablation:?}; expected suite or one of {}", names.join(", ")))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    let json = cli.json;
    let io = |e: std::io::Error| e.to_string();
    match &cli.command {
        Command::Ingest { file } => {
            let app = App::open(load_config(&cli)?).map_err(|e| e.to_string())?;
            let report = app.ingest_path(file).map_err(|e| e.to_string())?;
            if json {
                emit(out, &report)
            } else {
                print_ingest(out, &report).map_err(io)
            }
        }
        Command::Serve { bind } => {
            let mut cfg = load_config(&cli)?;
            if let Some(b) = bind {
                cfg.bind = b.clone();
            }
            let addr = cfg.bind.clone();
            let app = Arc::new(App::open(cfg).map_err(|e| e.to_string())?);
            if app.engine().is_none() {
                tracing::warn!("starting without a knowledge base; /query and /recommend return 503 until ingest");
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
                http::serve(app, listener).await.map_err(|e| e.to_string())
            })
        }
        Command::Query { text, lat, lon, time } => {
            let app = open_loaded(load_config(&cli)?)?;
            let input = QueryInput { q: text.clone(), lat: *lat, lon: *lon, time: time.clone() };
            let r = app.query(&input).map_err(|e| e.to_string())?;
            if json {
                emit(out, &r)
            } else {
                print_query(out, &r).map_err(io)
            }
        }
        Command::Recommend { lat, lon, user, k, time } => {
            let app = open_loaded(load_config(&cli)?)?;
            let input = RecommendInput { lat: *lat, lon: *lon, time: time.clone(), user_id: user.clone(), k: Some(*k) };
            let r = app.recommend(&input).map_err(|e| e.to_string())?;
            if json {
                emit(out, &r)
            } else {
                print_recommend(out, &r).map_err(io)
            }
        }
        Command::Eval { dataset, seed, ablation, timing } => {
            let cfg = load_config(&cli)?;
            eval(out, cfg.engine, dataset.as_deref(), *seed, ablation, *timing)
        }
        Command::Synth { seed, out: dir, items, queries, users } => {
            let d = SynthParams::default();
            let params = SynthParams {
                n_items: items.unwrap_or(d.n_items),
                n_queries: queries.unwrap_or(d.n_queries),
                n_users: users.unwrap_or(d.n_users),
                ..d
            };
            let data = synth_generate(*seed, params).map_err(|e| e.to_string())?;
            data.write_dir(dir).map_err(|e| e.to_string())?;
            if json {
                emit(out, &data.manifest)
            } else {
                writeln!(
                    out,
                    "wrote {} items, {} queries, {} users to {}",
                    data.items.len(),
                    data.queries.len(),
                    data.users.len(),
                    dir.display()
                )
                .map_err(io)
            }
        }
    }
}
