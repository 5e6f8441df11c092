use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use ee_lab::commands::{command_names, execute};
use ee_lab::config::{Overrides, Profile, RunConfig};
use ee_lab::output::read_metadata;
use ee_lab::RenyiOrder;

/// Disorder-ensemble entanglement entropy of 1D free fermions.
///
/// Commands: entropy-scan, density, lyapunov, bound-curve, factorization,
/// hcr-selftest. Flags override keys from --config.
#[derive(Debug, Parser)]
#[command(name = "ee-lab", version = env!("EE_LAB_VERSION"))]
struct Cli {
    /// Command to run; may instead come from the config file.
    command: Option<String>,

    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rerun the job recorded in the metadata line of an earlier output file.
    #[arg(long, conflicts_with_all = ["config", "command"])]
    rerun: Option<PathBuf>,

    /// Desk-scale defaults: N=1000, L=500, n=200, 10^6 transfer steps.
    #[arg(long, conflicts_with = "paper")]
    quick: bool,
    /// Paper-scale defaults (N=10000 for entropy-scan).
    #[arg(long)]
    paper: bool,

    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path (default: <command>.csv).
    #[arg(long, short)]
    out: Option<PathBuf>,

    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Chain length N.
    #[arg(long)]
    n_sites: Option<usize>,
    /// Block length L.
    #[arg(long)]
    block_len: Option<usize>,
    #[arg(long)]
    block_start: Option<usize>,
    #[arg(long)]
    shift_site: Option<usize>,
    /// Fermi energy E.
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long, short = 'n')]
    realizations: Option<usize>,
    /// Rényi order, or "inf".
    #[arg(long)]
    alpha: Option<RenyiOrder>,
    #[arg(long)]
    bins: Option<usize>,

    #[arg(long, value_delimiter = ',')]
    block_lengths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    shifts: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    energies: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,

    /// Transfer steps per Lyapunov point.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    renormalize_every: Option<u32>,

    #[arg(long)]
    selftest_delta: Option<f64>,
    #[arg(long)]
    selftest_shift: Option<f64>,
    #[arg(long)]
    draws: Option<u64>,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            command: self.command.clone(),
            master_seed: self.seed,
            family: self.family.clone(),
            delta: self.delta,
            n_sites: self.n_sites,
            block_len: self.block_len,
            block_start: self.block_start,
            shift_site: self.shift_site,
            fermi_energy: self.energy,
            n_realizations: self.realizations,
            alpha: self.alpha,
            bins: self.bins,
            workers: self.workers,
            block_lengths: self.block_lengths.clone(),
            shifts: self.shifts.clone(),
            energies: self.energies.clone(),
            families: self.families.clone(),
            deltas: self.deltas.clone(),
            lyapunov_steps: self.steps,
            lyapunov_batches: self.batches,
            renormalize_every: self.renormalize_every,
            selftest_delta: self.selftest_delta,
            selftest_shift: self.selftest_shift,
            selftest_draws: self.draws,
            output: self.out.clone(),
        }
    }

    fn profile(&self) -> Profile {
        if self.quick {
            Profile::Quick
        } else if self.paper {
            Profile::Paper
        } else {
            Profile::Standard
        }
    }

    fn resolve(&self) -> Result<RunConfig> {
        if let Some(path) = &self.rerun {
            let meta = read_metadata(path)?;
            let mut cfg = meta.config;
            cfg.workers = self.workers;
            cfg.output = self.out.clone();
            return Ok(cfg);
        }
        let file = match &self.config {
            Some(p) => Overrides::from_file(p)?,
            None => Overrides::default(),
        };
        let cfg = RunConfig::resolve(self.profile(), file.layered(self.overrides()), &command_names())?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.resolve()?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    execute(&cfg)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
