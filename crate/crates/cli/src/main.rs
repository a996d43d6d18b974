//! `specfsm` — extract protocol finite state machines from specification
//! text via an ensemble of LLM providers, then score the result against
//! ground truth.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use specfsm_cli::commands;
use specfsm_cli::config::{Overrides, RunConfig};
use specfsm_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "specfsm",
    version,
    about = "Extract protocol state machines from specification documents",
    after_help = "Exit codes: 0 success, 1 usage/config error, 2 pipeline or provider failure, 3 bad evaluation input."
)]
struct Cli {
    /// Run configuration file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Span-overlap alignment threshold in (0, 1]; overrides the config.
    #[arg(long, global = true)]
    theta: Option<f64>,

    /// Vote threshold; overrides the config (default: strict majority).
    #[arg(long, global = true)]
    votes: Option<usize>,

    /// Window merging budget in words; overrides the config.
    #[arg(long, global = true)]
    max_words: Option<usize>,

    /// Also write auxiliary artifacts (readable windows, clusters, DOT).
    #[arg(long, global = true)]
    dump: bool,

    /// Replay recorded responses from this fixture directory (one
    /// subdirectory per provider) instead of calling live endpoints.
    #[arg(long, global = true, value_name = "DIR")]
    replay: Option<PathBuf>,

    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean the document and split it into extraction windows.
    Segment,
    /// Query every provider for state and transition candidates.
    Extract,
    /// Align candidates across providers and majority-vote the machine.
    Ensemble,
    /// Score the voted machine against the configured ground truth.
    Eval {
        /// Machine to score (default: <out>/fsm.json).
        #[arg(long, value_name = "FILE")]
        fsm: Option<PathBuf>,
    },
    /// Summarize tokens and wall time per provider from the exchange log.
    Cost {
        /// Exchange log to read (default: <out>/exchanges.jsonl).
        #[arg(long, value_name = "FILE")]
        log: Option<PathBuf>,
    },
    /// Run the whole pipeline: segment, extract, ensemble, eval, cost.
    Run,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CliError::Config("missing --config <FILE> (required by this command)".to_string())
    })?;
    let overrides = Overrides {
        theta: cli.theta,
        votes: cli.votes,
        max_words: cli.max_words,
        out_dir: cli.out.clone(),
        dump: cli.dump,
    };
    RunConfig::load(path, &overrides)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Segment => commands::cmd_segment(&cfg).map(|_| ()),
        Command::Extract => commands::cmd_extract(&cfg, cli.replay.as_deref()).map(|_| ()),
        Command::Ensemble => commands::cmd_ensemble(&cfg, None).map(|_| ()),
        Command::Eval { fsm } => commands::cmd_eval(&cfg, fsm.as_deref()).map(|_| ()),
        Command::Cost { log } => commands::cmd_cost(&cfg, log.as_deref()).map(|_| ()),
        Command::Run => commands::cmd_run(&cfg, cli.replay.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap exits with 2 on usage errors by convention; this tool
            // reserves 2 for pipeline failures, so usage problems exit 1
            // (help and version print normally and exit 0).
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
