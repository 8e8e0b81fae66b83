mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use geodragon::error::EXIT_INPUT_ERROR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Geojson,
    Markdown,
}

#[derive(Debug, Parser)]
#[command(name = "geodragon", version, about = "Map-grounded navigation: ingest, query, route, run missions and evaluate")]
pub struct Cli {
    /// Knowledge-base snapshot produced by `ingest`.
    #[arg(long, global = true)]
    pub kb: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, or directory for commands that write several files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON settings file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an OSM extract (.osm XML or .jsonl) into a knowledge-base snapshot.
    Ingest {
        osm: PathBuf,
        /// Category rules file replacing the built-in table.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Rank entities for a natural-language place description.
    Query {
        text: String,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    /// Route from a WGS-84 position to the entity a description resolves to.
    Route {
        /// Start as `lat,lon`.
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        /// Destination description or entity id.
        #[arg(long)]
        to: String,
    },
    /// Run a mission plan in a simulated world and write its report.
    Mission {
        /// JSON plan file.
        #[arg(long, conflicts_with = "instruction")]
        plan: Option<PathBuf>,
        /// Instruction such as "Navigate to the library and find a red jacket".
        #[arg(long)]
        instruction: Option<String>,
        /// World fixture stem (`<stem>.txt` and `<stem>.json`).
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Run the evaluation suite and emit the metrics report.
    Eval,
    /// Generate a synthetic campus: OSM extract, snapshot and world fixture.
    Synth,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let body = serde_json::json!({ "error": {
                "code": "usage",
                "message": e.to_string().trim_end(),
                "exit_code": EXIT_INPUT_ERROR,
            }});
            eprintln!("{body}");
            return ExitCode::from(EXIT_INPUT_ERROR as u8);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GEODRAGON_LOG", "warn"))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
