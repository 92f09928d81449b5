use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quadlat::cli::{self, LatticeDocument};
use quadlat::Error;

#[derive(Parser)]
#[command(
    name = "quadlat",
    version,
    about = "Exact invariants, self-dual embeddings, and local models of p-local quadratic lattices"
)]
struct Args {
    /// Output format: "text" or "structured" (JSON).
    #[arg(long, global = true, default_value = "text")]
    format: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank, signature, radical, discriminant group, and maximality.
    Analyze {
        /// Lattice document path; "-" or absent reads stdin.
        input: Option<PathBuf>,
    },
    /// Constructive embedding into a self-dual lattice of controlled rank.
    Embed {
        /// Lattice document path; "-" or absent reads stdin.
        input: Option<PathBuf>,
    },
    /// Quadric point enumeration, charts, and smoothness verdicts.
    Localmodel {
        /// Lattice document path; "-" or absent reads stdin.
        input: Option<PathBuf>,
        /// Field size to enumerate over (p or p^2); repeatable. Defaults to p.
        #[arg(long = "q")]
        q: Vec<u64>,
        /// Also present the refined model and compare point counts.
        #[arg(long)]
        refined: bool,
        /// Witt truncation length for charts and verdicts.
        #[arg(long, default_value_t = 6)]
        k: u32,
    },
    /// Deterministic self-checks of every module.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// "small" or "large".
        #[arg(long, default_value = "small")]
        size: String,
    },
}

enum Format {
    Text,
    Structured,
}

fn parse_format(s: &str) -> quadlat::Result<Format> {
    match s {
        "text" => Ok(Format::Text),
        "structured" => Ok(Format::Structured),
        other => Err(Error::Parse(format!(
            "unknown format {other:?} (expected \"text\" or \"structured\")"
        ))),
    }
}

fn load(input: &Option<PathBuf>) -> quadlat::Result<LatticeDocument> {
    let text = match input {
        Some(path) if path.as_os_str() != "-" => std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?,
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Error::Parse(format!("cannot read stdin: {e}")))?;
            buf
        }
    };
    LatticeDocument::from_json(&text)
}

fn run(args: &Args) -> quadlat::Result<u8> {
    let format = parse_format(&args.format)?;
    let (report, code) = match &args.command {
        Command::Analyze { input } => (cli::cmd_analyze(&load(input)?)?, 0),
        Command::Embed { input } => (cli::cmd_embed(&load(input)?)?, 0),
        Command::Localmodel { input, q, refined, k } => {
            (cli::cmd_localmodel(&load(input)?, q, *refined, *k)?, 0)
        }
        Command::Selftest { seed, size } => {
            let report = cli::cmd_selftest(*seed, size)?;
            let failed = report.selftest.as_ref().map(|b| !b.passed).unwrap_or(true);
            (report, if failed { 5 } else { 0 })
        }
    };
    let rendered = match format {
        Format::Text => report.to_text(),
        Format::Structured => report.to_structured(),
    };
    print!("{rendered}");
    Ok(code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
