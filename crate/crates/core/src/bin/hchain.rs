use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hchain::harness::{
    cmd_current, cmd_profile, cmd_simulate, cmd_variance, verify_all, HarnessConfig, HarnessError, Report, Trend,
    EXIT_CHECK_FAILURE, EXIT_CONFIG, EXIT_PASS,
};

/// Periodic steady states of a driven pinned harmonic chain.
#[derive(Debug, Parser)]
#[command(name = "hchain", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON config with model parameters and optional `tolerances`, `simulation`, `sweeps` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Chain size for single-size commands; overrides the config.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Comma-separated chain sizes for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Master seed of the Monte Carlo replicas.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving CSV files and report.json.
    #[arg(long, global = true, default_value = "hchain-out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Require strictly decreasing errors in trend checks instead of a non-positive fitted slope.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Finite-n currents against the asymptotic current over a sweep.
    Current,
    /// Temperature profile, exact identities and distance from the linear law.
    Profile,
    /// Monte Carlo estimates against the exact engine.
    Simulate {
        /// Override the number of replicas.
        #[arg(long)]
        replicas: Option<usize>,
        /// Override the number of averaged periods.
        #[arg(long)]
        periods: Option<usize>,
        /// Override the automatic burn-in (periods).
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Scaled time variance of the kinetic temperature over a sweep.
    Variance {
        /// Also compare with the periodic moment ODE at this size.
        #[arg(long)]
        ode_n: Option<usize>,
    },
    /// Every check over the configured sweeps.
    VerifyAll,
}

fn run(cli: Cli) -> Result<Report, HarnessError> {
    let g = &cli.global;
    if let Some(threads) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| HarnessError::Usage(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &g.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    let single = g.n.unwrap_or(cfg.chain.n);
    let trend = Trend::from_strict(g.strict);
    let out = &g.out_dir;
    let list = |default: &[usize]| -> Result<Vec<usize>, HarnessError> {
        let ns = g.n_list.clone().or_else(|| g.n.map(|n| vec![n])).unwrap_or_else(|| default.to_vec());
        if ns.is_empty() {
            return Err(HarnessError::Usage("empty --n-list".into()));
        }
        Ok(ns)
    };
    let report = match cli.command {
        Command::Current => cmd_current(&cfg, &list(&cfg.sweeps.current)?, trend, out)?,
        Command::Profile => cmd_profile(&cfg, single, out)?,
        Command::Simulate { replicas, periods, burn_in } => {
            let sim = &mut cfg.simulation;
            sim.replicas = replicas.unwrap_or(sim.replicas);
            sim.periods = periods.unwrap_or(sim.periods);
            sim.burn_in = burn_in.or(sim.burn_in);
            cmd_simulate(&cfg, single, g.seed, out)?
        }
        Command::Variance { ode_n } => cmd_variance(&cfg, &list(&cfg.sweeps.variance)?, ode_n, out)?,
        Command::VerifyAll => verify_all(&cfg, g.seed, trend, out)?,
    };
    report.write(out)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            for c in &report.checks {
                println!("{c}");
            }
            let verdict = if report.pass { "PASS" } else { "FAIL" };
            println!("{verdict} {} ({} checks)", report.command, report.checks.len());
            ExitCode::from(if report.pass { EXIT_PASS } else { EXIT_CHECK_FAILURE })
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            debug_assert!(code == EXIT_CHECK_FAILURE || code == EXIT_CONFIG);
            ExitCode::from(code)
        }
    }
}
