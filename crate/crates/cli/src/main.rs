use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zcrit::charge::{builtin_charge, Rational, BUILTIN_NAMES};
use zcrit_cli::charge_eval::{describe, model_dimension, model_topology};
use zcrit_cli::config::{Overrides, RunConfig, Suite, DEFAULT_CONFIG};
use zcrit_cli::error::{CliError, CliResult, ConfigError};
use zcrit_cli::RunSummary;

#[derive(Parser)]
#[command(
    name = "zcrit",
    version,
    about = "Z-critical operators and moment-map checks on model geometries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// TOML run configuration; the built-in default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces every check tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points per axis for every geometry (nodes on CP1).
    #[arg(long)]
    grid: Option<usize>,
}

impl RunFlags {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let overrides = Overrides {
            seed: self.seed,
            suite: self.suite,
            tol: self.tol,
            out: self.out.clone(),
            grid: self.grid,
        };
        match &self.config {
            Some(path) => RunConfig::load(path, &overrides),
            None => RunConfig::parse(DEFAULT_CONFIG, &overrides),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write reports.
    Verify(RunFlags),
    /// Solve the dHYM equation on a line bundle by the damped flow.
    SolveDhym {
        #[command(flatten)]
        flags: RunFlags,
        /// Bundle section to solve on; defaults to the first with `flow = true`.
        #[arg(long)]
        bundle: Option<String>,
    },
    /// Evaluate or list central charges.
    Charge {
        #[command(subcommand)]
        action: ChargeAction,
    },
    /// Print the summary of a previous run and exit by its pass flags.
    Report {
        /// Output directory of the run.
        #[arg(long, default_value = "zcrit-out")]
        out: PathBuf,
        /// A specific reports file, instead of `<out>/reports.json`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChargeAction {
    /// Z and its phase on a model (t2, t4, cp1).
    Eval {
        /// Built-in name, or a charge section of `--config`.
        #[arg(long)]
        name: String,
        #[arg(long)]
        model: String,
        /// Bundle rank, for bundle charges.
        #[arg(long, default_value_t = 1)]
        rank: usize,
        /// Line-bundle Chern numbers, comma separated (default all zero).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        chern: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Names of the built-in charges.
    List,
}

fn finish(summary: RunSummary) -> CliResult<ExitCode> {
    print!("{}", summary.table);
    Ok(ExitCode::from(summary.exit_code() as u8))
}

fn charge_eval(
    name: &str,
    model: &str,
    rank: usize,
    chern: &[String],
    config: Option<&PathBuf>,
) -> CliResult<()> {
    let n = model_dimension(model)?;
    let spec = match config {
        Some(path) => {
            let cfg = RunConfig::load(path, &Overrides::default())?;
            match cfg.charges.get(name) {
                Some(charge) => charge.for_dimension(n).ok_or_else(|| {
                    CliError::Usage(format!("charge `{name}` is not defined in dimension {n}"))
                })?,
                None => builtin_by_name(name, n)?,
            }
        }
        None => builtin_by_name(name, n)?,
    };
    let chern = chern
        .iter()
        .map(|s| {
            s.trim()
                .parse::<Rational>()
                .map_err(|_| CliError::Usage(format!("--chern: `{s}` is not a rational number")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let topo = model_topology(model, spec.kind(), rank, &chern)?;
    print!("{}", describe(&spec, model, &topo)?);
    Ok(())
}

fn builtin_by_name(name: &str, n: usize) -> CliResult<zcrit::charge::CentralChargeSpec> {
    builtin_charge(name, n).map_err(|_| {
        CliError::Usage(format!(
            "unknown charge `{name}` (built-ins: {})",
            BUILTIN_NAMES.join(", ")
        ))
    })
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Verify(flags) => finish(zcrit_cli::verify(&flags.load()?)?),
        Command::SolveDhym { flags, bundle } => {
            finish(zcrit_cli::solve_dhym(&flags.load()?, bundle.as_deref())?)
        }
        Command::Charge { action } => match action {
            ChargeAction::Eval {
                name,
                model,
                rank,
                chern,
                config,
            } => {
                charge_eval(&name, &model, rank, &chern, config.as_ref())?;
                Ok(ExitCode::SUCCESS)
            }
            ChargeAction::List => {
                for name in BUILTIN_NAMES {
                    let kind = match builtin_charge(name, 1).map(|s| s.kind()) {
                        Ok(zcrit::charge::ChargeKind::Manifold) => "manifold",
                        _ => "bundle",
                    };
                    println!("{name}\t{kind}");
                }
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Report { out, input } => {
            let path = input.unwrap_or_else(|| out.join("reports.json"));
            finish(zcrit_cli::report(&path)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
