use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fdsic::sim::{self, RunSummary, Scenario, SimConfig, SweepRecord, SweepVariable};
use fdsic::validation;

#[derive(Parser)]
#[command(version, about = "Digital SI cancellation simulator for full-duplex massive-MIMO OFDM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the interference-to-noise ratio (dB).
    SweepInr(SweepArgs),
    /// Sweep the signal-of-interest SNR (dB).
    SweepSnr(SweepArgs),
    /// Sweep the relative phase-noise bandwidth.
    SweepPn(SweepArgs),
    /// Run the model cross-checks.
    Validate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Fewer Monte Carlo draws.
        #[arg(long)]
        fast: bool,
    },
    /// One configuration, full report.
    Single(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Plain-text `key = value` file with SimConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json_summary: Option<PathBuf>,
    /// 32 subcarriers, 8 antennas, 200 trials (overridden by --config).
    #[arg(long)]
    fast: bool,
    /// Only keep records of this method (`optimal` or `ls`).
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated sweep values (a standard grid per variable if omitted).
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

impl CommonArgs {
    fn config(&self) -> anyhow::Result<SimConfig> {
        let mut config = match &self.config {
            Some(path) => SimConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None if self.fast => SimConfig::fast(),
            None => SimConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            config.n_trials = trials;
        }
        config.validate()?;
        Ok(config)
    }

    fn filter(&self, records: Vec<SweepRecord>) -> anyhow::Result<Vec<SweepRecord>> {
        let Some(method) = &self.method else {
            return Ok(records);
        };
        let keep = match method.as_str() {
            "optimal" => sim::Method::Optimal,
            "ls" => sim::Method::Ls,
            "none" => return Ok(Vec::new()),
            other => bail!("unknown method {other:?}"),
        };
        Ok(records.into_iter().filter(|r| r.method == keep).collect())
    }

    fn report(&self, config: SimConfig, var: Option<SweepVariable>, records: Vec<SweepRecord>) -> anyhow::Result<()> {
        let records = self.filter(records)?;
        match &self.out {
            Some(path) => sim::emit_csv(&records, path)?,
            None => sim::write_csv(&records, std::io::stdout().lock())?,
        }
        if let Some(path) = &self.json_summary {
            RunSummary::new(config, var, records).write(path)?;
        }
        Ok(())
    }
}

fn run_sweep(args: SweepArgs, var: SweepVariable) -> anyhow::Result<()> {
    let config = args.common.config()?;
    let values = if args.values.is_empty() {
        match var {
            SweepVariable::Inr => vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0],
            SweepVariable::Snr => vec![0.0, 5.0, 10.0, 15.0, 20.0],
            SweepVariable::DeltaF => vec![1e-5, 1e-4, 1e-3, 1e-2],
        }
    } else {
        args.values
    };
    let records = sim::sweep(&config, var, &values)?;
    args.common.report(config, Some(var), records)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::SweepInr(args) => run_sweep(args, SweepVariable::Inr),
        Command::SweepSnr(args) => run_sweep(args, SweepVariable::Snr),
        Command::SweepPn(args) => run_sweep(args, SweepVariable::DeltaF),
        Command::Validate { seed, fast } => {
            let checks = validation::run_all(seed, fast)?;
            for check in &checks {
                println!("{check}");
            }
            if checks.iter().any(|c| !c.passed) {
                bail!("validation failed");
            }
            Ok(())
        }
        Command::Single(args) => {
            let config = args.config()?;
            let scenario = Scenario::new(config.clone())?;
            let outcomes = scenario.run_trials(true)?;
            let p = &scenario.powers;
            eprintln!(
                "E_I = {:.4e}, N_c·σ_n² = {:.4e}, σ_u² = {:.4e}, per-antenna channel power = {:.4e}",
                p.si_power, p.noise_floor, p.soi_power, p.channel_power
            );
            let records = sim::aggregate(SweepVariable::Inr, config.inr_db, p, &outcomes)?;
            for r in &records {
                eprintln!(
                    "{:?}: G = {:.2} dB ± {:.2} (theory {}), mean residual {:.4e}",
                    r.method,
                    r.g_emp_db,
                    r.ci_db,
                    r.g_theo_db.map_or("n/a".to_string(), |g| format!("{g:.2} dB")),
                    r.resid_mean
                );
            }
            args.report(config, None, records.to_vec())
        }
    }
}
