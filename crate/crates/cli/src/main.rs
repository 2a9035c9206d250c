use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qnetsense_cli::commands::{self, CommandError};
use qnetsense_cli::config::{override_grid, parse_config, ProtocolChoice, ScenarioConfig};
use qnetsense_cli::Table;

#[derive(Parser)]
#[command(name = "qnetsense", version, about = "GHZ distribution over a lossy star network and phase-estimation bounds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// all, central-station or direct.
    #[arg(long, global = true)]
    protocol: Option<ProtocolChoice>,
    /// Grid for the swept axis, e.g. 0:40:1, 0.05:1:n20 or -pi/4,0,pi/4.
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Bounds against loss in dB at fixed phase.
    SweepLoss,
    /// Bounds against the phase combination at fixed loss.
    SweepPhase,
    /// Exact and closed-form heralding probabilities against transmittance.
    SuccessProb,
    /// Monte-Carlo maximum-likelihood estimates against the Cramér–Rao bound.
    Estimate,
    /// Heralded-state table and exact constants; exits 2 on failure.
    TableCheck {
        /// Extra phase on one interferometer arm, in radians.
        #[arg(long, allow_hyphen_values = true)]
        phase_error: Option<f64>,
    },
}

enum Failure {
    Validation(String),
    Check,
}

impl From<CommandError> for Failure {
    fn from(e: CommandError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(p) = common.protocol {
        cfg.protocol = p;
    }
    Ok(cfg)
}

fn grid(common: &Common, axis: &str, fallback: &qnetsense_cli::Grid) -> Result<qnetsense_cli::Grid, Failure> {
    match &common.grid {
        Some(spec) => override_grid(axis, spec).map_err(|e| Failure::Validation(e.to_string())),
        None => Ok(fallback.clone()),
    }
}

fn emit(table: &Table, out: &Option<PathBuf>) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::Validation(format!("writing output: {e}"));
    match out {
        Some(path) => table.write_to(io::BufWriter::new(fs::File::create(path).map_err(io_err)?)),
        None => table.write_to(io::stdout().lock()),
    }
    .map_err(io_err)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load(&cli.common)?;
    let table = match cli.command {
        Command::SweepLoss => commands::sweep_loss(&cfg, &grid(&cli.common, "loss", &cfg.loss_grid)?)?,
        Command::SweepPhase => commands::sweep_phase(&cfg, &grid(&cli.common, "phase", &cfg.phase_grid)?)?,
        Command::SuccessProb => commands::success_prob(&cfg, &grid(&cli.common, "eta", &cfg.eta_grid)?)?,
        Command::Estimate => {
            let (table, s) = commands::estimate(&cfg)?;
            let mut err = io::stderr().lock();
            let _ = writeln!(
                err,
                "truth {:.6}  mean {:.6}  variance {:.6e}  bound {:.6e}  ratio {}  flat runs {}",
                s.truth,
                s.mean,
                s.sample_variance,
                s.crb,
                s.ratio.map_or_else(|| "n/a".to_owned(), |r| format!("{r:.4}")),
                s.flat_runs
            );
            table
        }
        Command::TableCheck { phase_error } => {
            if let Some(e) = phase_error {
                cfg.phase_error = e;
            }
            let (table, ok) = commands::table_check(&cfg)?;
            emit(&table, &cli.common.out)?;
            return if ok { Ok(()) } else { Err(Failure::Check) };
        }
    };
    emit(&table, &cli.common.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Check) => {
            eprintln!("check failed");
            ExitCode::from(2)
        }
    }
}
