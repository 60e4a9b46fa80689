//! `adjunct-cc`: transform, analyze, scan and differential-run driver.
//!
//! Exit codes: 0 success, 1 input error (unreadable file, parse or type
//! error, bad flags), 2 internal error, 3 run-diff found a mismatch.

mod commands;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "adjunct-cc", version, about = "Pointer disaggregation for a C subset")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rewrite decidable pointers into container plus adjunct offset.
    Transform(TransformArgs),
    /// Report loop-carried dependence verdicts for every loop.
    Analyze(AnalyzeArgs),
    /// Count applicable and constraining pointer uses in C files.
    Scan(ScanArgs),
    /// Run two programs in the interpreter and compare their traces.
    RunDiff(RunDiffArgs),
    /// Print a random well-defined program from the generator.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct EffectsArg {
    /// `builtin`, `none`, or a JSON whitelist layered over the built-ins.
    #[arg(long, value_name = "builtin|none|PATH", default_value = "builtin")]
    effects: String,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file; only with a single input. Defaults to `<stem>.adjunct.c`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Rewrite recognized LIL initializations before the transform.
    #[arg(long)]
    enable_lil: bool,
    #[command(flatten)]
    effects: EffectsArg,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Apply the adjunct transform before analyzing.
    #[arg(long)]
    pre_transform: bool,
    /// Rewrite recognized LIL initializations before analyzing.
    #[arg(long)]
    enable_lil: bool,
    #[command(flatten)]
    effects: EffectsArg,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Files, or directories searched recursively for `.c` and `.h` files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, alias = "report")]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Value,
}

#[derive(Debug, Args)]
struct RunDiffArgs {
    left: PathBuf,
    right: PathBuf,
    /// Function to call in both programs.
    #[arg(long)]
    entry: String,
    /// Scalar argument for the entry function; repeat per parameter.
    #[arg(long = "input", short = 'i', value_name = "NUMBER", allow_negative_numbers = true)]
    inputs: Vec<String>,
    #[arg(long, value_enum, default_value = "strict")]
    mode: Mode,
    /// Interpreter step budget per run.
    #[arg(long, default_value_t = 10_000_000)]
    fuel: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of top-level statements.
    #[arg(long, default_value_t = 24)]
    size: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Failure of a subcommand, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Internal(String),
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Internal(_) => 2,
            Failure::Mismatch(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Internal(m) | Failure::Mismatch(m) => m,
        }
    }
}

/// ANSI colour on stderr unless disabled by `ADJUNCT_CC_COLOR` or not a terminal.
fn color() -> bool {
    let disabled = std::env::var("ADJUNCT_CC_COLOR")
        .map(|v| matches!(v.to_ascii_lowercase().as_str(), "0" | "never" | "off" | "false" | "no"))
        .unwrap_or(false);
    !disabled && std::io::stderr().is_terminal()
}

pub fn note(label: &str, text: &str) {
    if color() {
        let code = if label == "error" { "31" } else { "36" };
        eprintln!("\x1b[1;{code}m{label}:\x1b[0m {text}");
    } else {
        eprintln!("{label}: {text}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Transform(a) => commands::transform(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Scan(a) => commands::scan(a),
        Command::RunDiff(a) => commands::run_diff(a),
        Command::Generate(a) => commands::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            for line in f.message().lines() {
                if line.contains("error:") || line.starts_with(' ') {
                    eprintln!("{line}");
                } else {
                    note("error", line);
                }
            }
            ExitCode::from(f.code())
        }
    }
}
