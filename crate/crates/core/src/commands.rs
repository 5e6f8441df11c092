//! Named jobs behind the command line. Each command turns a [`RunConfig`]
//! into a table; [`execute`] looks the command up by name and writes the
//! result.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::disorder::DisorderSpec;
use crate::ensemble::{
    cv_lower_curve, default_bins, density_estimate, entropies, entropy_vs_length, run_ensemble,
    variance_factorization_check, EnsembleError, Sample, MIN_DENSITY_SAMPLES,
};
use crate::hcr_toy;
use crate::lyapunov::lyapunov_at;
use crate::output::{cell, samples_path, samples_table, write_table, Metadata, Table};
use crate::seeding;

/// What a command produces: the main table and, optionally, the raw
/// per-realization samples.
pub struct Report {
    pub table: Table,
    pub samples: Option<Vec<Sample>>,
}

impl From<Table> for Report {
    fn from(table: Table) -> Self {
        Self { table, samples: None }
    }
}

pub trait Command: Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, cfg: &RunConfig) -> Result<Report>;
}

static COMMANDS: [&dyn Command; 6] = [
    &EntropyScan,
    &Density,
    &Lyapunov,
    &BoundCurve,
    &Factorization,
    &HcrSelftest,
];

pub fn commands() -> &'static [&'static dyn Command] {
    &COMMANDS
}

pub fn command_names() -> Vec<&'static str> {
    COMMANDS.iter().map(|c| c.name()).collect()
}

pub fn lookup_command(name: &str) -> Option<&'static dyn Command> {
    COMMANDS.iter().copied().find(|c| c.name() == name)
}

pub fn default_output(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(format!("{}.csv", cfg.command))
}

/// Runs the configured command and writes its files. Returns the main output path.
pub fn execute(cfg: &RunConfig) -> Result<PathBuf> {
    let command = lookup_command(&cfg.command).with_context(|| format!("unknown command {:?}", cfg.command))?;
    info!("{}: {}", command.name(), command.about());
    let report = command.run(cfg).with_context(|| format!("{} failed", command.name()))?;
    let path = cfg.output.clone().unwrap_or_else(|| default_output(cfg));
    let meta = Metadata::new(cfg);
    write_table(&path, &meta, &report.table).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    if let Some(samples) = report.samples {
        let sp = samples_path(&path);
        write_table(&sp, &meta, &samples_table(&samples)).with_context(|| format!("writing {}", sp.display()))?;
        info!("wrote {}", sp.display());
    }
    Ok(path)
}

fn warn_if_not_bipartite(cfg: &RunConfig) {
    if !cfg.chain.in_bipartite_regime() {
        warn!(
            "block of {} sites in a chain of {} is outside the bipartite regime",
            cfg.chain.block_len, cfg.chain.n_sites
        );
    }
}

struct EntropyScan;

impl Command for EntropyScan {
    fn name(&self) -> &'static str {
        "entropy-scan"
    }
    fn about(&self) -> &'static str {
        "mean, variance and coefficient of variation of the block entropy against block length"
    }
    fn run(&self, cfg: &RunConfig) -> Result<Report> {
        let points = entropy_vs_length(
            &cfg.disorder,
            cfg.chain.n_sites,
            &cfg.grids.block_lengths,
            cfg.chain.fermi_energy,
            cfg.alpha,
            cfg.n_realizations,
            cfg.master_seed,
        )?;
        let mut t = Table::new(&[
            "block_len",
            "n_realizations",
            "mean",
            "variance",
            "cv",
            "stderr_mean",
            "stderr_cv",
        ]);
        for p in points {
            let s = p.stats;
            t.push(vec![
                cell(p.block_len),
                cell(s.n_realizations),
                cell(s.mean),
                cell(s.variance),
                cell(s.coeff_variation),
                cell(s.stderr_mean),
                cell(s.stderr_cv),
            ]);
        }
        Ok(t.into())
    }
}

struct Density;

impl Command for Density {
    fn name(&self) -> &'static str {
        "density"
    }
    fn about(&self) -> &'static str {
        "histogram of the block entropy with a moment-matched Gaussian"
    }
    fn run(&self, cfg: &RunConfig) -> Result<Report> {
        if cfg.n_realizations < MIN_DENSITY_SAMPLES {
            return Err(EnsembleError::TooFewSamples {
                needed: MIN_DENSITY_SAMPLES,
                got: cfg.n_realizations,
            }
            .into());
        }
        warn_if_not_bipartite(cfg);
        let samples = run_ensemble(&cfg.disorder, &cfg.chain, cfg.alpha, cfg.n_realizations, cfg.master_seed)?;
        let bins = cfg.bins.unwrap_or_else(|| default_bins(samples.len()));
        let (est, fit) = density_estimate(&entropies(&samples), bins)?;
        info!(
            "mean {:.6}, std {:.6}, Gaussian fit error {:.4}",
            fit.mu, fit.sigma, fit.fit_error
        );
        let mut t = Table::new(&["bin_left", "bin_right", "density", "gaussian", "fit_error"]);
        for (i, w) in est.bin_edges.windows(2).enumerate() {
            t.push(vec![
                cell(w[0]),
                cell(w[1]),
                cell(est.density[i]),
                cell(fit.density_at(0.5 * (w[0] + w[1]))),
                cell(fit.fit_error),
            ]);
        }
        Ok(Report {
            table: t,
            samples: Some(samples),
        })
    }
}

struct Lyapunov;

impl Command for Lyapunov {
    fn name(&self) -> &'static str {
        "lyapunov"
    }
    fn about(&self) -> &'static str {
        "Lyapunov exponent and localization radius over families, disorder strengths and energies"
    }
    fn run(&self, cfg: &RunConfig) -> Result<Report> {
        let mut jobs = Vec::new();
        for family in &cfg.grids.families {
            for &delta in &cfg.grids.deltas {
                let spec = DisorderSpec::new(family, delta)?;
                for &energy in &cfg.grids.energies {
                    jobs.push((spec, energy));
                }
            }
        }
        let opts = cfg.lyapunov.options();
        let results = jobs
            .par_iter()
            .enumerate()
            .map(|(r, (spec, energy))| {
                let seed = seeding::child_seed(cfg.master_seed, r as u64);
                let res = lyapunov_at(spec, *energy, opts, seed)?;
                info!(
                    "{} δ={} E={}: radius {:.3}",
                    spec.family_name(),
                    spec.delta(),
                    energy,
                    res.radius
                );
                Ok((seed, res))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(&[
            "family",
            "delta",
            "energy",
            "gamma",
            "gamma_stderr",
            "radius",
            "n_steps",
            "seed",
        ]);
        for ((spec, _), (seed, r)) in jobs.iter().zip(results) {
            t.push(vec![
                spec.family_name().to_string(),
                cell(spec.delta()),
                cell(r.energy),
                cell(r.gamma),
                cell(r.std_error),
                cell(r.radius),
                cell(r.n_steps),
                cell(seed),
            ]);
        }
        Ok(t.into())
    }
}

struct BoundCurve;

impl Command for BoundCurve {
    fn name(&self) -> &'static str {
        "bound-curve"
    }
    fn about(&self) -> &'static str {
        "Hammersley–Chapman–Robbins lower bound on the coefficient of variation against the shift t"
    }
    fn run(&self, cfg: &RunConfig) -> Result<Report> {
        warn_if_not_bipartite(cfg);
        let c = cv_lower_curve(
            &cfg.disorder,
            &cfg.chain,
            &cfg.grids.shifts,
            cfg.alpha,
            cfg.n_realizations,
            cfg.master_seed,
        )?;
        info!(
            "measured C_V {:.5} ± {:.5}; max bound {:.5} at t = {} (ratio {:.3} ± {:.3})",
            c.measured_cv,
            c.measured_cv_stderr,
            c.max_ratio * c.measured_cv,
            c.argmax_t,
            c.max_ratio,
            c.max_ratio_stderr
        );
        if !c.bound_holds {
            warn!("lower bound exceeds the measured coefficient of variation by more than 2 standard errors");
        }
        let mut t = Table::new(&[
            "t",
            "fisher_gap",
            "mean_shifted",
            "cv_lower",
            "cv_lower_stderr",
            "measured_cv",
            "measured_cv_stderr",
        ]);
        for i in 0..c.t_grid.len() {
            t.push(vec![
                cell(c.t_grid[i]),
                cell(c.fisher_gap[i]),
                cell(c.mean_shifted[i]),
                cell(c.cv_lower[i]),
                cell(c.cv_lower_stderr[i]),
                cell(c.measured_cv),
                cell(c.measured_cv_stderr),
            ]);
        }
        Ok(t.into())
    }
}

struct Factorization;

impl Command for Factorization {
    fn name(&self) -> &'static str {
        "factorization"
    }
    fn about(&self) -> &'static str {
        "variance of a two-cut block against a one-cut half chain"
    }
    fn run(&self, cfg: &RunConfig) -> Result<Report> {
        let c = variance_factorization_check(
            &cfg.disorder,
            cfg.chain.n_sites,
            cfg.chain.block_len,
            cfg.chain.fermi_energy,
            cfg.n_realizations,
            cfg.master_seed,
        )?;
        let ratio = c.ratio.map_or_else(|| "nan".to_string(), cell);
        info!("variance ratio {ratio} ({:?})", c.status);
        let status = serde_json::to_value(c.status)?;
        let mut t = Table::new(&[
            "n_sites",
            "block_len",
            "var_block",
            "var_single_cut",
            "ratio",
            "radius",
            "status",
        ]);
        t.push(vec![
            cell(cfg.chain.n_sites),
            cell(cfg.chain.block_len),
            cell(c.var_block),
            cell(c.var_single_cut),
            ratio,
            cell(c.radius),
            status.as_str().unwrap_or_default().to_string(),
        ]);
        Ok(t.into())
    }
}

struct HcrSelftest;

impl Command for HcrSelftest {
    fn name(&self) -> &'static str {
        "hcr-selftest"
    }
    fn about(&self) -> &'static str {
        "scalar variance bound for an exponential variable against closed forms"
    }
    fn run(&self, cfg: &RunConfig) -> Result<Report> {
        let s = cfg.selftest;
        let c = hcr_toy::monte_carlo(s.delta, s.shift, s.draws, cfg.master_seed)?;
        info!(
            "variance exceeds the bound by {:.1} standard errors; largest discrepancy {:.2e}",
            c.margin_sigmas,
            c.max_discrepancy()
        );
        if c.margin_sigmas <= 3.0 {
            bail!("sampled variance is within 3 standard errors of the bound");
        }
        let mut t = Table::new(&["quantity", "closed_form", "monte_carlo"]);
        let rows = [
            ("mean_phi", c.exact.mean_phi, c.sampled.mean_phi),
            ("mean_phi_shifted", c.exact.mean_phi_shifted, c.sampled.mean_phi_shifted),
            ("var_phi", c.exact.var_phi, c.sampled.var_phi),
            ("bound", c.exact.bound, c.sampled.bound),
        ];
        for (name, exact, sampled) in rows {
            t.push(vec![name.to_string(), cell(exact), cell(sampled)]);
        }
        t.push(vec!["var_stderr".into(), String::new(), cell(c.var_stderr)]);
        t.push(vec!["margin_sigmas".into(), String::new(), cell(c.margin_sigmas)]);
        Ok(t.into())
    }
}
