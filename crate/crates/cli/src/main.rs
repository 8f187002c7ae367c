use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qauth_cli::commands::{self, default_epsilons};
use qauth_cli::config::{AttackArg, ExperimentConfig, ForgerArgs, ProtocolArg, SourceArg};
use qauth_cli::simulate::{simulate, summary_json};
use qauth_cli::CliError;

#[derive(Parser, Debug)]
#[command(name = "qauth", version, about = "Simulate PUF-based entanglement authentication and its adversaries")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run independent authentication rounds and write a JSON summary.
    Simulate(SimulateArgs),
    /// Emit the analytic curves and tables as CSV.
    Analyze {
        #[command(subcommand)]
        kind: AnalyzeKind,
    },
    /// Grid-search the single-qubit forgery strategy.
    Optimize {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.005)]
        resolution: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a transcript file produced by `simulate --transcripts`.
    Replay {
        path: PathBuf,
        /// Exit with status 3 when any invariant fails.
        #[arg(long)]
        strict: bool,
        /// Write the full per-round report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    #[arg(long, value_enum, default_value = "none")]
    attack: AttackArg,
    #[arg(long, value_enum, default_value = "perfect")]
    source: SourceArg,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Pairs per round: m offline, k online.
    #[arg(long, default_value_t = 1)]
    bits: usize,
    /// Challenge length.
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    db_size: usize,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    grid_resolution: Option<f64>,
    #[arg(long)]
    rx: Option<f64>,
    #[arg(long)]
    rz: Option<f64>,
    #[arg(long)]
    rpx: Option<f64>,
    #[arg(long)]
    rpz: Option<f64>,
    #[arg(long)]
    q0: Option<f64>,
    /// Summary JSON path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial transcripts as JSON lines.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum AnalyzeKind {
    Figure3 {
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 32)]
        bits: u32,
        #[arg(long)]
        out: PathBuf,
    },
    Table1 {
        #[arg(long, default_value_t = 16)]
        bits: u32,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Bounds {
        /// Comma-separated epsilons; defaults to 101 points over [0, 0.25].
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long, default_value_t = 16)]
        bits: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

impl SimulateArgs {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let forger = match (self.rx, self.rz, self.rpx, self.rpz, self.q0) {
            (None, None, None, None, None) => None,
            (Some(rx), Some(rz), Some(rpx), Some(rpz), Some(q0)) => Some(ForgerArgs { rx, rz, rpx, rpz, q0 }),
            _ => return Err(CliError::Config("--rx --rz --rpx --rpz --q0 must be given together".into())),
        };
        let config = ExperimentConfig {
            protocol: self.protocol,
            attack: self.attack,
            source: self.source,
            challenge_bits: self.n,
            bits: self.bits,
            delta: self.delta,
            epsilon: self.epsilon,
            trials: self.trials,
            master_seed: self.seed,
            db_size: self.db_size,
            grid_resolution: self.grid_resolution,
            forger,
        };
        config.validate()?;
        Ok(config)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let config = args.config()?;
            let summary = simulate(&config, args.transcripts.as_deref())?;
            let json = summary_json(&summary);
            match &args.out {
                Some(p) => write_file(p, &json)?,
                None => print!("{json}"),
            }
            let reference = summary
                .analytic_reference
                .map(|r| format!("{r:.6}"))
                .unwrap_or_else(|| "n/a".into());
            eprintln!(
                "accepted {}/{} rate {:.6} [{:.6}, {:.6}] analytic {} wall {:.3}s",
                summary.accept_count,
                summary.trials,
                summary.empirical_rate,
                summary.wilson_lo,
                summary.wilson_hi,
                reference,
                summary.wall_time.as_secs_f64()
            );
        }
        Command::Analyze { kind } => {
            let (rows, out) = match kind {
                AnalyzeKind::Figure3 { points, bits, out } => (commands::analyze_figure3(points, bits, &out)?, out),
                AnalyzeKind::Table1 { bits, delta, out } => (commands::analyze_table1(bits, delta, &out)?, out),
                AnalyzeKind::Bounds { epsilons, bits, out } => {
                    let eps = epsilons.unwrap_or_else(default_epsilons);
                    (commands::analyze_bounds(&eps, bits, &out)?, out)
                }
            };
            eprintln!("wrote {rows} rows to {}", out.display());
        }
        Command::Optimize { delta, resolution, out } => {
            let report = commands::optimize(delta, resolution)?;
            let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
            json.push('\n');
            match out {
                Some(p) => write_file(&p, &json)?,
                None => print!("{json}"),
            }
        }
        Command::Replay { path, strict, out } => {
            let report = commands::replay(&path)?;
            report
                .print(&mut std::io::stdout().lock())
                .map_err(|e| CliError::io(Path::new("stdout"), e))?;
            if let Some(p) = out {
                let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
                json.push('\n');
                write_file(&p, &json)?;
            }
            if strict && !report.passed() {
                return Err(CliError::Invariant(format!(
                    "{} of {} rounds violate an invariant",
                    report.failed_rounds, report.rounds
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { 1 });
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("configuration error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("could not start the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
