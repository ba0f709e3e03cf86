//! `dlaperf`: measure kernels, build performance models, predict and rank
//! blocked algorithms and tensor contractions.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::ToolkitConfig;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dlaperf", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in machine name or machine JSON file.
    #[arg(long, global = true)]
    machine: Option<String>,
    /// `reference`, `synthetic`, `synthetic-cache`, `synthetic-noise` or a
    /// BLAS/LAPACK shared library (`path[:THREAD_ENV]`).
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    threads: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    models_dir: Option<PathBuf>,
    /// Field separator of tabular output.
    #[arg(long, global = true, default_value = "tab", value_parser = parse_delimiter)]
    delimiter: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Time every call of a call-list file.
    Measure(commands::MeasureArgs),
    /// Generate piecewise polynomial kernel models.
    ModelGen(commands::ModelGenArgs),
    /// Predict the runtime and performance of a blocked algorithm.
    Predict(commands::PredictArgs),
    /// Rank blocked algorithms by predicted runtime.
    Rank(commands::RankArgs),
    /// Select the block size with the lowest predicted runtime.
    Blocksize(commands::BlocksizeArgs),
    /// List the BLAS-based algorithms of a tensor contraction.
    TensorGen(commands::TensorGenArgs),
    /// Rank the algorithms of a tensor contraction by predicted runtime.
    TensorPredict(commands::TensorPredictArgs),
    /// Per-call estimates that account for cache reuse between calls.
    CacheEstimate(commands::CacheEstimateArgs),
    /// Export plot data.
    Export(commands::ExportArgs),
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "tab" | "\\t" => Ok(b'\t'),
        "comma" => Ok(b','),
        "semicolon" => Ok(b';'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be one ASCII character, `tab`, `comma` or `semicolon`, not `{s}`")),
    }
}

fn settings(g: &GlobalArgs) -> dlaperf::Result<ToolkitConfig> {
    let mut cfg = match &g.config {
        Some(p) => ToolkitConfig::load(p)?,
        None => ToolkitConfig::default(),
    };
    if let Some(v) = &g.machine {
        cfg.machine = v.clone();
    }
    if let Some(v) = &g.backend {
        cfg.backend = v.clone();
    }
    if let Some(v) = g.threads {
        cfg.threads = v;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = &g.models_dir {
        cfg.models_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli, out: &mut dyn Write) -> dlaperf::Result<()> {
    let cfg = settings(&cli.global)?;
    let env = commands::Env {
        cfg,
        delimiter: cli.global.delimiter,
    };
    match cli.command {
        Command::Measure(a) => commands::measure(&env, &a, out),
        Command::ModelGen(a) => commands::model_gen(&env, &a, out),
        Command::Predict(a) => commands::predict(&env, &a, out),
        Command::Rank(a) => commands::rank(&env, &a, out),
        Command::Blocksize(a) => commands::blocksize(&env, &a, out),
        Command::TensorGen(a) => commands::tensor_gen(&env, &a, out),
        Command::TensorPredict(a) => commands::tensor_predict(&env, &a, out),
        Command::CacheEstimate(a) => commands::cache_estimate(&env, &a, out),
        Command::Export(a) => commands::export(&env, &a, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out).and_then(|_| out.flush().map_err(Into::into)) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed reader (e.g. `| head`) is not a failure of the command.
        Err(dlaperf::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
