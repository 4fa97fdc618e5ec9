mod commands;
mod load;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nnefx::conventions::PoolConvention;
use nnefx::petri::EnumerationCap;

/// Parse, analyse, split, run and verify multi-item NNEF descriptions.
///
/// Exit codes: 0 success, 2 validation failure, 3 missing resource,
/// 4 semantic or equivalence failure, 5 runtime deadlock.
#[derive(Parser)]
#[command(name = "nnefx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and translate; report net size and path count.
    Check {
        /// One description, or the files of an item set.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Path cap; markings are capped at ten times this.
        #[arg(long, default_value_t = 100_000)]
        cap: u64,
        /// Write the marking graph as JSON.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a description sequentially.
    Eval {
        model: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Tensor file (single input) or directory of `<name>.dat`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Directory receiving one `<output>.dat` per output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Split a description into item descriptions.
    Split {
        model: PathBuf,
        #[arg(long)]
        assignment: Option<PathBuf>,
        /// Print suggested assignments over at most N items instead.
        #[arg(long, value_name = "N")]
        suggest: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check that an item set behaves as the original description.
    Verify {
        model: PathBuf,
        #[arg(required = true)]
        items: Vec<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        cap: u64,
        #[arg(long)]
        json: bool,
    },
    /// Run an item set concurrently, then check outputs and trace.
    Run {
        #[arg(required = true)]
        items: Vec<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Directory receiving outputs and `trace.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON map `{item: {"after": point, "delay_ms": n}}`.
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Use the three-barrier schedule when the item set allows it.
        #[arg(long)]
        barrier: bool,
        #[arg(long)]
        json: bool,
    },
    /// Replay a recorded trace against a description or item set.
    TraceValidate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Compare max-pooling padding conventions.
    Diff {
        /// keras-valid, keras-same, torch-P or torch-PH,PW.
        #[arg(long = "convention", default_values = ["keras-same", "torch-1"])]
        conventions: Vec<PoolConvention>,
        #[arg(long, default_value_t = 2)]
        kernel: usize,
        #[arg(long, default_value_t = 2)]
        stride: usize,
        /// Input height and width, `N` or `HxW`.
        #[arg(long, default_value = "28", value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long)]
        json: bool,
    },
    /// Graphviz rendering of the net of a description or item set.
    Dot {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write random weights and inputs for a description.
    Gen {
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
    match s.split_once('x') {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

fn cap(paths: u64) -> EnumerationCap {
    EnumerationCap {
        paths,
        markings: usize::try_from(paths.saturating_mul(10)).unwrap_or(usize::MAX),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check {
            files,
            cap: c,
            graph,
            json,
        } => commands::check(&files, cap(c), graph.as_deref(), json),
        Command::Eval {
            model,
            weights,
            input,
            out,
            json,
        } => commands::eval(
            &model,
            weights.as_deref(),
            input.as_deref(),
            out.as_deref(),
            json,
        ),
        Command::Split {
            model,
            assignment,
            suggest,
            out,
            json,
        } => commands::split_cmd(&model, assignment.as_deref(), suggest, &out, json),
        Command::Verify {
            model,
            items,
            cap: c,
            json,
        } => commands::verify(&model, &items, cap(c), json),
        Command::Run {
            items,
            weights,
            input,
            out,
            noise,
            barrier,
            json,
        } => commands::run(commands::RunArgs {
            items: &items,
            weights: weights.as_deref(),
            input: input.as_deref(),
            out: out.as_deref(),
            noise: noise.as_deref(),
            barrier,
            json,
        }),
        Command::TraceValidate { files, trace, json } => {
            commands::trace_validate(&files, &trace, json)
        }
        Command::Diff {
            conventions,
            kernel,
            stride,
            size,
            channels,
            json,
        } => commands::diff(&conventions, kernel, stride, size, channels, json),
        Command::Dot { files, out } => commands::dot(&files, out.as_deref()),
        Command::Gen { model, out, seed } => commands::gen(&model, &out, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
