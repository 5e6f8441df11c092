//! Monte Carlo over disorder realizations.
//!
//! Realization `k` of a run with master seed `m` draws its potential from the
//! child stream `(m, k)`. Every driver here that takes the same `(m, k)`
//! therefore sees the same potential, whatever the block length, shift or
//! disorder strength (site values are `δ · g(u)` for a fixed uniform `u`).
//! Realizations run in parallel and results are collected in index order.

mod stats;

use std::sync::atomic::{AtomicUsize, Ordering};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::disorder::{fisher_gap, DisorderError, DisorderFamily, DisorderSpec, PotentialLaw};
use crate::lyapunov::{lyapunov_at, LyapunovError, LyapunovOptions};
use crate::seeding;
use crate::spectral::{
    block_occupations, build_operator, eigendecompose, renyi_entropy, ChainConfig, Operator1D, Potential,
    Region, RenyiOrder, SpectralError,
};

pub use stats::{
    default_bins, density_estimate, jackknife_stderr, leave_one_out_cvs, leave_one_out_means, statistics,
    DensityEstimate, EnsembleStats, GaussianFit, MIN_DENSITY_SAMPLES,
};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("all samples are equal")]
    DegenerateSample,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("{failed} of {total} realizations failed; first failure at realization {index}: {source}")]
    Realizations {
        failed: usize,
        total: usize,
        index: usize,
        source: SpectralError,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

/// One realization's entropy with the seed that reproduces it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub index: usize,
    pub seed: u64,
    pub entropy: f64,
}

pub fn entropies(samples: &[Sample]) -> Vec<f64> {
    samples.iter().map(|s| s.entropy).collect()
}

fn check_count(n: usize) -> Result<(), EnsembleError> {
    if n < 2 {
        Err(EnsembleError::TooFewSamples { needed: 2, got: n })
    } else {
        Ok(())
    }
}

/// Runs `task(index, seed)` for every realization in parallel and returns the
/// results in index order. Fails if any realization fails.
pub fn for_each_realization<T, F>(n: usize, master_seed: u64, task: F) -> Result<Vec<T>, EnsembleError>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T, SpectralError> + Sync,
{
    let done = AtomicUsize::new(0);
    let step = (n / 10).max(1);
    let results: Vec<Result<T, SpectralError>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let out = task(k, seeding::child_seed(master_seed, k as u64));
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if finished % step == 0 || finished == n {
                info!("realizations {finished}/{n}");
            }
            out
        })
        .collect();

    let failed = results.iter().filter(|r| r.is_err()).count();
    let mut out = Vec::with_capacity(n);
    let mut first = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                first.get_or_insert((k, e));
            }
        }
    }
    match first {
        None => Ok(out),
        Some((index, source)) => Err(EnsembleError::Realizations {
            failed,
            total: n,
            index,
            source,
        }),
    }
}

/// The unshifted potential of the realization seeded with `seed`.
pub fn realization_potential<L: PotentialLaw + ?Sized>(
    law: &L,
    n_sites: usize,
    seed: u64,
) -> Result<Potential, SpectralError> {
    Potential::sample(law, n_sites, &mut seeding::stream(seed))
}

/// Entropies of several blocks from a single diagonalization of `op`.
pub fn operator_entropies(
    op: &Operator1D,
    fermi_energy: f64,
    regions: &[Region],
    alpha: RenyiOrder,
) -> Result<Vec<f64>, SpectralError> {
    let eig = eigendecompose(op)?;
    regions
        .iter()
        .map(|r| renyi_entropy(&block_occupations(&eig, fermi_energy, r)?, alpha))
        .collect()
}

pub fn run_ensemble<L: PotentialLaw + ?Sized>(
    law: &L,
    cfg: &ChainConfig,
    alpha: RenyiOrder,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<Sample>, EnsembleError> {
    check_count(n_realizations)?;
    cfg.validate()?;
    let block = [cfg.block()];
    for_each_realization(n_realizations, master_seed, |index, seed| {
        let v = realization_potential(law, cfg.n_sites, seed)?.configured(cfg)?;
        let entropy = operator_entropies(&build_operator(&v), cfg.fermi_energy, &block, alpha)?[0];
        Ok(Sample { index, seed, entropy })
    })
}

/// Entropies of every region for every realization, indexed
/// `[realization][region]`. Each realization is diagonalized once.
pub fn block_scan<L: PotentialLaw + ?Sized>(
    law: &L,
    n_sites: usize,
    fermi_energy: f64,
    regions: &[Region],
    alpha: RenyiOrder,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>, EnsembleError> {
    check_count(n_realizations)?;
    if let Some(bad) = regions.iter().filter_map(Region::max_site).find(|&m| m >= n_sites) {
        return Err(EnsembleError::InvalidArgument(format!(
            "region site {bad} outside chain of {n_sites} sites"
        )));
    }
    for_each_realization(n_realizations, master_seed, |_, seed| {
        let v = realization_potential(law, n_sites, seed)?;
        operator_entropies(&build_operator(&v), fermi_energy, regions, alpha)
    })
}

/// Column `j` of a `[realization][region]` table.
pub fn column(table: &[Vec<f64>], j: usize) -> Vec<f64> {
    table.iter().map(|row| row[j]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthPoint {
    pub block_len: usize,
    pub stats: EnsembleStats,
}

/// Statistics of centered blocks of each length in `lengths`, all from the
/// same realizations.
pub fn entropy_vs_length<L: PotentialLaw + ?Sized>(
    law: &L,
    n_sites: usize,
    lengths: &[usize],
    fermi_energy: f64,
    alpha: RenyiOrder,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<LengthPoint>, EnsembleError> {
    let configs = lengths
        .iter()
        .map(|&l| ChainConfig::centered(n_sites, l, fermi_energy))
        .collect::<Result<Vec<_>, _>>()?;
    for c in configs.iter().filter(|c| !c.in_bipartite_regime()) {
        warn!(
            "block length {} in a chain of {} is outside the bipartite regime",
            c.block_len, c.n_sites
        );
    }
    let regions: Vec<Region> = configs.iter().map(ChainConfig::block).collect();
    let table = block_scan(law, n_sites, fermi_energy, &regions, alpha, n_realizations, master_seed)?;
    lengths
        .iter()
        .enumerate()
        .map(|(j, &block_len)| {
            Ok(LengthPoint {
                block_len,
                stats: statistics(&column(&table, j))?,
            })
        })
        .collect()
}

/// Entropy statistics with `V(s) → V(s) + t` at the configured shift site,
/// on the same potentials as the unshifted run with this seed.
pub fn shifted_mean_entropy<L: PotentialLaw + ?Sized>(
    law: &L,
    cfg: &ChainConfig,
    t: f64,
    alpha: RenyiOrder,
    n_realizations: usize,
    master_seed: u64,
) -> Result<EnsembleStats, EnsembleError> {
    let samples = run_ensemble(law, &cfg.with_shift(t), alpha, n_realizations, master_seed)?;
    statistics(&entropies(&samples))
}

/// Entropies with the shift site deleted from the chain, the `t → ∞` limit of
/// the shifted operator. The deleted site is dropped from the block.
pub fn removed_site_entropies<L: PotentialLaw + ?Sized>(
    law: &L,
    cfg: &ChainConfig,
    alpha: RenyiOrder,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<f64>, EnsembleError> {
    check_count(n_realizations)?;
    cfg.validate()?;
    let s = cfg.shift_site;
    let region = Region::from_sites(
        cfg.block()
            .sites()
            .iter()
            .filter(|&&x| x != s)
            .map(|&x| if x > s { x - 1 } else { x })
            .collect(),
    );
    if region.is_empty() {
        return Err(EnsembleError::InvalidArgument(
            "block consists of the removed site only".into(),
        ));
    }
    let regions = [region];
    for_each_realization(n_realizations, master_seed, |_, seed| {
        let v = realization_potential(law, cfg.n_sites, seed)?;
        let op = build_operator(&v).without_site(s);
        Ok(operator_entropies(&op, cfg.fermi_energy, &regions, alpha)?[0])
    })
}

/// `24` log-spaced shifts in `[0.05δ, 50δ]`.
pub fn default_t_grid(delta: f64) -> Vec<f64> {
    log_grid(0.05 * delta, 50.0 * delta, 24)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Lower bound `C_V(t) = √2 |1 - E{S^t}/E{S}| / √F(t)` on the coefficient of
/// variation, against the measured value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCurve {
    pub t_grid: Vec<f64>,
    pub fisher_gap: Vec<f64>,
    pub mean_unshifted: f64,
    pub mean_shifted: Vec<f64>,
    pub cv_lower: Vec<f64>,
    pub cv_lower_stderr: Vec<f64>,
    pub measured_cv: f64,
    pub measured_cv_stderr: f64,
    pub argmax_t: f64,
    /// `max_t cv_lower / measured_cv`.
    pub max_ratio: f64,
    pub max_ratio_stderr: f64,
    /// `cv_lower ≤ measured_cv + 2 stderr` at every grid point.
    pub bound_holds: bool,
}

fn cv_lower_point(mean: f64, mean_shifted: f64, gap: f64) -> f64 {
    if mean == 0.0 || gap <= 0.0 {
        return 0.0;
    }
    std::f64::consts::SQRT_2 * (1.0 - mean_shifted / mean).abs() / gap.sqrt()
}

pub fn cv_lower_curve(
    spec: &DisorderSpec,
    cfg: &ChainConfig,
    t_grid: &[f64],
    alpha: RenyiOrder,
    n_realizations: usize,
    master_seed: u64,
) -> Result<BoundCurve, EnsembleError> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(EnsembleError::InvalidArgument(
            "shift grid must be nonempty with positive finite entries".into(),
        ));
    }
    let gaps = t_grid
        .iter()
        .map(|&t| fisher_gap(spec, t).map(|g| g.value))
        .collect::<Result<Vec<_>, _>>()?;
    check_count(n_realizations)?;
    cfg.validate()?;

    let block = [cfg.block()];
    // Row k: [S, S^{t_1}, ..., S^{t_m}] for realization k.
    let table = for_each_realization(n_realizations, master_seed, |_, seed| {
        let v = realization_potential(spec, cfg.n_sites, seed)?;
        let mut row = Vec::with_capacity(t_grid.len() + 1);
        row.push(operator_entropies(&build_operator(&v), cfg.fermi_energy, &block, alpha)?[0]);
        for &t in t_grid {
            let shifted = v.clone().with_shift(cfg.shift_site, t)?;
            row.push(operator_entropies(&build_operator(&shifted), cfg.fermi_energy, &block, alpha)?[0]);
        }
        Ok(row)
    })?;

    let base = column(&table, 0);
    let measured = statistics(&base)?;
    let n = base.len();
    let loo_base = leave_one_out_means(&base);
    let loo_cv = leave_one_out_cvs(&base);

    let mut mean_shifted = Vec::with_capacity(t_grid.len());
    let mut cv_lower = Vec::with_capacity(t_grid.len());
    let mut cv_lower_stderr = Vec::with_capacity(t_grid.len());
    // Leave-one-out replicates of max_t cv_lower / cv.
    let mut loo_max = vec![0.0f64; n];
    for (j, &gap) in gaps.iter().enumerate() {
        let shifted = column(&table, j + 1);
        let m_t = shifted.iter().sum::<f64>() / n as f64;
        mean_shifted.push(m_t);
        cv_lower.push(cv_lower_point(measured.mean, m_t, gap));
        let loo_shifted = leave_one_out_means(&shifted);
        let replicates: Vec<f64> = (0..n)
            .map(|i| cv_lower_point(loo_base[i], loo_shifted[i], gap))
            .collect();
        for i in 0..n {
            if loo_cv[i] > 0.0 {
                loo_max[i] = loo_max[i].max(replicates[i] / loo_cv[i]);
            }
        }
        cv_lower_stderr.push(jackknife_stderr(&replicates));
    }

    let (imax, best) = cv_lower
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, c)| if c > acc.1 { (i, c) } else { acc });
    let max_ratio = if measured.coeff_variation > 0.0 {
        best / measured.coeff_variation
    } else {
        f64::NAN
    };
    let slack = measured.coeff_variation + 2.0 * measured.stderr_cv;
    Ok(BoundCurve {
        t_grid: t_grid.to_vec(),
        fisher_gap: gaps,
        mean_unshifted: measured.mean,
        mean_shifted,
        bound_holds: cv_lower.iter().all(|&c| c <= slack),
        cv_lower,
        cv_lower_stderr,
        measured_cv: measured.coeff_variation,
        measured_cv_stderr: measured.stderr_cv,
        argmax_t: t_grid[imax],
        max_ratio,
        max_ratio_stderr: jackknife_stderr(&loo_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorizationStatus {
    Checked,
    /// The localization radius is not small against the block and its environment.
    Skipped,
    /// Both variances vanish, so the ratio is meaningless.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationCheck {
    pub var_block: f64,
    pub var_single_cut: f64,
    pub ratio: Option<f64>,
    pub radius: f64,
    pub status: FactorizationStatus,
}

/// A block is "long" against the localization radius when it spans at least
/// this many radii.
pub const RADII_PER_BLOCK: f64 = 10.0;

/// Compares the variance of a centered block (two cuts) with that of the
/// half chain `[0, N/2)` (one cut), from the same realizations.
pub fn variance_factorization_check<L: PotentialLaw + ?Sized>(
    law: &L,
    n_sites: usize,
    block_len: usize,
    fermi_energy: f64,
    n_realizations: usize,
    master_seed: u64,
) -> Result<FactorizationCheck, EnsembleError> {
    let cfg = ChainConfig::centered(n_sites, block_len, fermi_energy)?;
    if n_sites < 2 {
        return Err(EnsembleError::InvalidArgument("chain needs two sites".into()));
    }
    let regions = [cfg.block(), Region::interval(0, n_sites / 2)];
    let table = block_scan(
        law,
        n_sites,
        fermi_energy,
        &regions,
        RenyiOrder::VON_NEUMANN,
        n_realizations,
        master_seed,
    )?;
    let var_block = statistics(&column(&table, 0))?.variance;
    let var_single_cut = statistics(&column(&table, 1))?.variance;

    // The radius estimate uses its own stream, disjoint from the realizations.
    let radius = lyapunov_at(
        law,
        fermi_energy,
        LyapunovOptions::quick(),
        seeding::child_seed(master_seed, u64::MAX),
    )?
    .radius;
    let shortest = block_len.min(n_sites - block_len) as f64;

    let (status, ratio) = if var_single_cut == 0.0 {
        warn!("single-cut variance vanishes; factorization ratio undefined");
        (FactorizationStatus::Undefined, None)
    } else if RADII_PER_BLOCK * radius > shortest {
        warn!("localization radius {radius:.1} is not small against {shortest} sites; factorization check skipped");
        (FactorizationStatus::Skipped, Some(var_block / var_single_cut))
    } else {
        (FactorizationStatus::Checked, Some(var_block / var_single_cut))
    };
    Ok(FactorizationCheck {
        var_block,
        var_single_cut,
        ratio,
        radius,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderPoint {
    pub delta: f64,
    pub stats: EnsembleStats,
    pub samples: Vec<f64>,
}

/// Entropy statistics across disorder strengths of one family, on common
/// random numbers.
pub fn entropy_vs_disorder(
    family: &'static dyn DisorderFamily,
    deltas: &[f64],
    cfg: &ChainConfig,
    alpha: RenyiOrder,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<DisorderPoint>, EnsembleError> {
    deltas
        .iter()
        .map(|&delta| {
            let spec = DisorderSpec::with_family(family, delta)?;
            let samples = entropies(&run_ensemble(&spec, cfg, alpha, n_realizations, master_seed)?);
            Ok(DisorderPoint {
                delta,
                stats: statistics(&samples)?,
                samples,
            })
        })
        .collect()
}
