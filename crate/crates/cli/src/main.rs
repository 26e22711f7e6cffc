use std::path::PathBuf;
use std::process::ExitCode;

use annihilation_kinetics::config::help_config;
use annihilation_kinetics_cli::{
    diagnose, init_threads, load_config, profile, rates, resume, simulate, sweep, verify_constants, Analysis,
    CliError, CliResult, Overrides, CONSTANTS_JSON, DIAGNOSTICS_JSON, RATES_JSON, SWEEP_JSON,
};
use clap::{Args, Parser, Subcommand};

/// DSMC simulation and self-similar analysis of ballistic annihilation.
///
/// Exit codes: 0 all checks passed, 1 a check failed, 2 config or usage
/// error, 3 run or I/O failure.
#[derive(Parser)]
#[command(name = "annihilation-kinetics", version)]
struct Cli {
    /// Print every configuration key with its type and default, then exit.
    #[arg(long)]
    help_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shards: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            shards: self.shards,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its trajectory, profile and checkpoint.
    Simulate(RunArgs),
    /// Continue the run in --out-dir from its checkpoint.
    Resume {
        #[arg(long)]
        out_dir: PathBuf,
        /// Replacement config, e.g. with later stopping rules; alpha must match.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Fit decay exponents of a finished run and compare with profile predictions.
    Rates {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run one simulation per alpha and compare rescaled convergence rates.
    Sweep {
        /// Comma-separated alpha values, at least two.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the dimension-dependent constants with quadrature checks.
    VerifyConstants {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        dims: Vec<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Extract the tail profile of a run into profile.csv.
    Profile {
        #[arg(long)]
        out_dir: PathBuf,
        /// Rescaled time from which snapshots count; defaults to the run config.
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long)]
        svg: bool,
    },
    /// Check moment envelopes, entropy balance, lower bound and tails of a run.
    Diagnose {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn finish(a: Analysis, path: Option<PathBuf>) -> CliResult<bool> {
    print!("{}", a.text);
    if let Some(p) = path {
        a.write(&p)?;
    }
    Ok(a.passed())
}

fn dispatch(cmd: Command) -> CliResult<bool> {
    match cmd {
        Command::Simulate(args) => {
            let cfg = load_config(args.config.as_deref(), &args.overrides())?;
            println!("{}", simulate(&cfg, &args.out_dir, args.svg)?);
            Ok(true)
        }
        Command::Resume { out_dir, config, svg } => {
            println!("{}", resume(&out_dir, config.as_deref(), svg)?);
            Ok(true)
        }
        Command::Rates { out_dir } => finish(rates(&out_dir)?, Some(out_dir.join(RATES_JSON))),
        Command::Sweep { alphas, run } => {
            let cfg = load_config(run.config.as_deref(), &run.overrides())?;
            let (_, a) = sweep(&alphas, &cfg, &run.out_dir, run.svg)?;
            finish(a, Some(run.out_dir.join(SWEEP_JSON)))
        }
        Command::VerifyConstants { dims, out_dir } => {
            if let Some(d) = &out_dir {
                std::fs::create_dir_all(d).map_err(|e| CliError::Run(e.into()))?;
            }
            finish(verify_constants(&dims)?, out_dir.map(|d| d.join(CONSTANTS_JSON)))
        }
        Command::Profile { out_dir, burn_in, svg } => finish(profile(&out_dir, burn_in, svg)?, None),
        Command::Diagnose { out_dir } => finish(diagnose(&out_dir)?, Some(out_dir.join(DIAGNOSTICS_JSON))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.help_config {
        print!("{}", help_config());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(2);
    };
    match init_threads().and_then(|_| dispatch(cmd)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
