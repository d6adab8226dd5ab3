use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ew_cli::commands::{self, parse_list, parse_omega, Overrides};
use ew_cli::CliError;
use ew_core::registry::EMBED_URL_ENV;

#[derive(Parser)]
#[command(name = "ew", version, about = "Event-graph memory for multi-session dialogue")]
struct Cli {
    /// Engine config JSON; omitted fields keep their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of events to retrieve
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Recency, relevance and structural weights
    #[arg(long, global = true, value_parser = parse_omega, value_name = "R,V,S")]
    omega: Option<[f64; 3]>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable output
    #[arg(long, global = true)]
    json: bool,
    /// Most recent segments scored at retrieval; 0 scores all
    #[arg(long, global = true)]
    max_sessions: Option<usize>,
    /// Embedder strategy name
    #[arg(long, global = true)]
    embedder: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a memory snapshot from a JSON-lines transcript
    Build {
        transcript: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Retrieve events for a query and print the prompt packet
    Retrieve { snapshot: PathBuf, query: String },
    /// Score retrieval predictions against gold annotations
    Eval {
        snapshot: PathBuf,
        gold: PathBuf,
        /// Also report backtracking recall at these deletion rates
        #[arg(long, value_name = "R1,R2,..")]
        rates: Option<String>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
    /// Backtracking recall under random edge deletion
    Br {
        snapshot: PathBuf,
        #[arg(long, value_name = "R1,R2,..", default_value = "0.1,0.2,0.3")]
        rates: String,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
    /// Rebuild the snapshot's transcript across threshold values
    Sweep {
        snapshot: PathBuf,
        param: String,
        #[arg(value_name = "V1,V2,..")]
        values: String,
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Prune every segment to a node budget
    Prune {
        snapshot: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        config: cli.config,
        k: cli.k,
        omega: cli.omega,
        seed: cli.seed,
        json: cli.json,
        max_sessions: cli.max_sessions,
        embedder: cli.embedder,
        embed_url: std::env::var(EMBED_URL_ENV).ok(),
    };
    let list = |s: &str| parse_list(s).map_err(|e| CliError::parse(format!("bad list: {e}")));
    let result = match &cli.command {
        Command::Build { transcript, out } => commands::cmd_build(transcript, out, &ov),
        Command::Retrieve { snapshot, query } => commands::cmd_retrieve(snapshot, query, &ov),
        Command::Eval {
            snapshot,
            gold,
            rates,
            runs,
        } => match rates.as_deref().map(list).transpose() {
            Ok(rates) => commands::cmd_eval(snapshot, gold, rates.as_deref().unwrap_or(&[]), *runs, &ov),
            Err(e) => Err(e),
        },
        Command::Br {
            snapshot,
            rates,
            runs,
        } => list(rates).and_then(|r| commands::cmd_br(snapshot, &r, *runs, &ov)),
        Command::Sweep {
            snapshot,
            param,
            values,
            gold,
        } => list(values).and_then(|v| commands::cmd_sweep(snapshot, param, &v, gold.as_deref(), &ov)),
        Command::Prune {
            snapshot,
            budget,
            out,
        } => commands::cmd_prune(snapshot, *budget, out.as_deref(), &ov),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ew: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
