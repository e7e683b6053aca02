//! `wew`: channel generation, single-instance solves, sweeps and protocol
//! checks. Data goes to `--output` or stdout; progress goes to stderr.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 solver or
//! verification failure.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "wew",
    version,
    about = "Minimum-power wireless emulation of a wired backhaul"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration; omitted fields keep their defaults.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Dotted-path overrides, e.g. `scenario.n_realizations=200 alpha1=1`.
    #[arg(long = "override", alias = "set", short = 's', num_args = 1.., value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; stdout when omitted.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the configured channel draws as CSV.
    GenChannels(Common),
    /// Solve the BS power problem on one draw, one JSON line per scheme.
    SolveBs(Common),
    /// Solve the SBS power-scaling problem on one draw.
    SolveSbs(Common),
    /// Run the downlink-rate sweep and write the result CSV.
    RunExperiment(Common),
    /// Exhaustive XOR round trips plus end-to-end protocol runs.
    VerifyProtocol {
        #[command(flatten)]
        common: Common,
        /// Longest downlink message in the exhaustive check.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u8).range(0..=16))]
        max_bits: u8,
        /// Number of seeded draws run through both phases.
        #[arg(long, default_value_t = 20)]
        instances: u64,
    },
}

/// Sink for one command's data stream.
pub struct Output {
    path: Option<PathBuf>,
    writer: Box<dyn Write>,
}

impl Output {
    fn open(path: Option<PathBuf>) -> Result<Self, CliError> {
        let writer: Box<dyn Write> = match &path {
            Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p).map_err(
                |e| CliError::Usage(format!("cannot create {}: {e}", p.display())),
            )?)),
            None => Box::new(std::io::stdout().lock()),
        };
        Ok(Self { path, writer })
    }

    pub fn path(&self) -> Option<&std::path::Path> {
        self.path.as_deref()
    }

    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.writer, "{text}").map_err(io_failure)
    }

    pub fn writer(&mut self) -> &mut dyn Write {
        &mut self.writer
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(io_failure)
    }
}

pub fn io_failure(e: std::io::Error) -> CliError {
    CliError::Usage(format!("write failed: {e}"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::GenChannels(c)
        | Command::SolveBs(c)
        | Command::SolveSbs(c)
        | Command::RunExperiment(c) => c,
        Command::VerifyProtocol { common, .. } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))?;
    }
    let cfg = config::load(common.config.as_deref(), &common.overrides)?;
    let mut out = Output::open(common.output.clone())?;
    let result = match &cli.command {
        Command::GenChannels(_) => commands::gen_channels(&cfg, &mut out),
        Command::SolveBs(_) => commands::solve_bs(&cfg, &mut out),
        Command::SolveSbs(_) => commands::solve_sbs(&cfg, &mut out),
        Command::RunExperiment(_) => commands::run_experiment(&cfg, &mut out),
        Command::VerifyProtocol {
            max_bits,
            instances,
            ..
        } => commands::verify_protocol(&cfg, *max_bits as usize, *instances, &mut out),
    };
    // keep whatever was produced before a solver failure
    out.finish()?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
