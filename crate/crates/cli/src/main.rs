use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kljn_core::config::RunConfig;
use kljn_core::experiments::{run_sweep_logged, summarize, write_metrics_csv, write_slot_log_csv, Eavesdropper};
use kljn_core::protocol::run_key_exchange_observed;
use kljn_core::truthtable::format_bits;
use kljn_core::verify::{run_identity_suite, VerifyOptions};

/// Monte Carlo simulator of Kirchhoff-law Johnson-noise key exchange.
#[derive(Parser)]
#[command(name = "kljn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one key exchange and write its metrics.
    Simulate(RunArgs),
    /// Run the configured parameter sweep.
    Sweep(RunArgs),
    /// Check the built-in analytic identities.
    Verify {
        /// Fewer samples, looser tolerances.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the configured root seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write the per-slot log.
    #[arg(long)]
    slot_log: bool,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        Ok(config)
    }
}

fn create(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::create(&path).with_context(|| format!("cannot create {}", path.display()))
}

fn simulate(args: &RunArgs) -> Result<()> {
    let config = args.load()?;
    let eve = Eavesdropper::new(&config.protocol, &config.eve)?;
    let exchange = run_key_exchange_observed(&config.protocol, config.n_bits, config.seed, |slot, stream, trace, _| {
        eve.observe(slot, stream, trace)
    })?;
    let row = summarize(&exchange.log, 0, "variant", config.protocol.variant.name(), config.seed);

    let dir = &config.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_metrics_csv(std::slice::from_ref(&row), create(dir, &config.output.metrics)?)?;
    if args.slot_log {
        write_slot_log_csv(&[(0, exchange.log.clone())], create(dir, &config.output.slot_log)?)?;
    }
    println!(
        "{}: {} bits in {} slots, {} errors, secure fraction {:.3}, eve success {:.3}, key {}",
        config.protocol.variant,
        exchange.key_alice.len(),
        exchange.log.len(),
        exchange.bit_errors(),
        row.secure_fraction,
        row.eve_bit_success,
        format_bits(&exchange.key_alice)
    );
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<()> {
    let config = args.load()?;
    let Some(spec) = config.sweep_spec() else {
        bail!("{}: configuration has no \"sweep\" section", args.config.display());
    };
    let result = run_sweep_logged(&spec)?;

    let dir = &config.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_metrics_csv(&result.rows, create(dir, &config.output.metrics)?)?;
    if args.slot_log {
        write_slot_log_csv(&result.logs, create(dir, &config.output.slot_log)?)?;
    }
    for row in &result.rows {
        println!(
            "{} = {}: ber {:.4}, secure {:.3}, eve {:.3} ± {:.3}",
            row.param_name, row.param_value, row.ber, row.secure_fraction, row.eve_bit_success, row.eve_bit_ci
        );
    }
    Ok(())
}

fn verify(quick: bool) -> Result<bool> {
    let checks = run_identity_suite(&VerifyOptions {
        quick,
        ..VerifyOptions::default()
    })?;
    for check in &checks {
        println!("{check}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => simulate(args).map(|()| true),
        Command::Sweep(args) => sweep(args).map(|()| true),
        Command::Verify { quick } => verify(*quick),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
