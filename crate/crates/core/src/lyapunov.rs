//! Lyapunov exponent of the transfer-matrix cocycle
//! `ψ(x+1) = (2 + V(x) - E) ψ(x) - ψ(x-1)` and the localization radius `1/γ`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::disorder::{sample_site, DisorderSpec, PotentialLaw};
use crate::seeding;

pub const MIN_STEPS: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("need at least {min} transfer steps, got {got}")]
    TooFewSteps { min: u64, got: u64 },
    #[error("need at least two batches for an error estimate, got {0}")]
    TooFewBatches(usize),
    #[error("renormalization interval must be at least 1")]
    ZeroInterval,
    #[error("energy grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    pub n_steps: u64,
    pub n_batches: usize,
    /// Steps between renormalizations of the two-vector.
    pub renormalize_every: u32,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            n_steps: 10_000_000,
            n_batches: 100,
            renormalize_every: 1,
        }
    }
}

impl LyapunovOptions {
    pub fn quick() -> Self {
        Self {
            n_steps: 1_000_000,
            ..Self::default()
        }
    }

    pub fn with_steps(n_steps: u64) -> Self {
        Self {
            n_steps,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), LyapunovError> {
        if self.n_steps < MIN_STEPS {
            return Err(LyapunovError::TooFewSteps {
                min: MIN_STEPS,
                got: self.n_steps,
            });
        }
        if self.n_batches < 2 {
            return Err(LyapunovError::TooFewBatches(self.n_batches));
        }
        if self.renormalize_every == 0 {
            return Err(LyapunovError::ZeroInterval);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovResult {
    pub energy: f64,
    /// Per lattice site.
    pub gamma: f64,
    /// `1 / gamma`, infinite when `gamma = 0`.
    pub radius: f64,
    pub n_steps: u64,
    pub std_error: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// One step of the recursion; returns `(ψ(x+1), ψ(x))`.
#[inline]
pub fn transfer_step(psi_curr: f64, psi_prev: f64, v: f64, energy: f64) -> (f64, f64) {
    ((v + 2.0 - energy) * psi_curr - psi_prev, psi_curr)
}

/// Lyapunov exponent with batch-means error, drawing site potentials from `law`.
pub fn lyapunov_with<L: PotentialLaw + ?Sized, R: Rng + ?Sized>(
    law: &L,
    energy: f64,
    opts: LyapunovOptions,
    rng: &mut R,
) -> Result<LyapunovResult, LyapunovError> {
    opts.validate()?;
    let n_batches = opts.n_batches as u64;
    let batch_len = opts.n_steps / n_batches;
    let interval = opts.renormalize_every as u64;

    let (mut curr, mut prev) = (1.0f64, 0.0f64);
    let mut total = CompensatedSum::default();
    let mut batch_means = Vec::with_capacity(opts.n_batches);

    for b in 0..n_batches {
        let len = if b + 1 == n_batches {
            opts.n_steps - batch_len * (n_batches - 1)
        } else {
            batch_len
        };
        let mut batch = CompensatedSum::default();
        for step in 1..=len {
            let v = sample_site(law, rng);
            (curr, prev) = transfer_step(curr, prev, v, energy);
            if step % interval == 0 || step == len {
                let norm = curr.hypot(prev);
                let log_norm = norm.ln();
                batch.add(log_norm);
                curr /= norm;
                prev /= norm;
            }
        }
        total.add(batch.value());
        batch_means.push(batch.value() / len as f64);
    }

    let gamma_raw = total.value() / opts.n_steps as f64;
    let mean_b = batch_means.iter().sum::<f64>() / batch_means.len() as f64;
    let var_b = batch_means.iter().map(|m| (m - mean_b).powi(2)).sum::<f64>()
        / (batch_means.len() - 1) as f64;
    let std_error = (var_b / batch_means.len() as f64).sqrt();
    let gamma = gamma_raw.max(0.0);
    let radius = if gamma > 0.0 { 1.0 / gamma } else { f64::INFINITY };
    Ok(LyapunovResult {
        energy,
        gamma,
        radius,
        n_steps: opts.n_steps,
        std_error,
    })
}

pub fn lyapunov_exponent<R: Rng + ?Sized>(
    spec: &DisorderSpec,
    energy: f64,
    n_steps: u64,
    rng: &mut R,
) -> Result<LyapunovResult, LyapunovError> {
    lyapunov_with(spec, energy, LyapunovOptions::with_steps(n_steps), rng)
}

/// Lyapunov exponent from a dedicated stream seeded with `seed`.
pub fn lyapunov_at<L: PotentialLaw + ?Sized>(
    law: &L,
    energy: f64,
    opts: LyapunovOptions,
    seed: u64,
) -> Result<LyapunovResult, LyapunovError> {
    lyapunov_with(law, energy, opts, &mut seeding::stream(seed))
}

/// One result per grid energy; point `i` uses the child stream `(master_seed, i)`.
pub fn radius_curve<L: PotentialLaw + ?Sized>(
    law: &L,
    energies: &[f64],
    opts: LyapunovOptions,
    master_seed: u64,
) -> Result<Vec<LyapunovResult>, LyapunovError> {
    if energies.is_empty() {
        return Err(LyapunovError::EmptyGrid);
    }
    energies
        .par_iter()
        .enumerate()
        .map(|(i, &e)| lyapunov_at(law, e, opts, seeding::child_seed(master_seed, i as u64)))
        .collect()
}
