//! Scalar check of the Hammersley–Chapman–Robbins inequality
//! `Var{φ(ξ)} ≥ (E{φ(ξ)} - E{φ(ξ+t)})² / F(t)` for `ξ ~ Exponential(δ)` and
//! `φ(x) = e^{-x}`, where every term has a closed form.

use serde::Serialize;

use crate::disorder::{fisher_gap, hcr_bound, DisorderError, DisorderSpec};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyMoments {
    pub mean_phi: f64,
    pub mean_phi_shifted: f64,
    pub var_phi: f64,
    pub bound: f64,
}

/// `E e^{-ξ} = 1/(1+δ)`, `E e^{-2ξ} = 1/(1+2δ)`, and the shifted mean picks up `e^{-t}`.
pub fn closed_form(delta: f64, t: f64) -> Result<ToyMoments, DisorderError> {
    let spec = DisorderSpec::new("exponential", delta)?;
    let mean_phi = 1.0 / (1.0 + delta);
    let mean_phi_shifted = (-t).exp() * mean_phi;
    let var_phi = 1.0 / (1.0 + 2.0 * delta) - mean_phi * mean_phi;
    let bound = hcr_bound(mean_phi, mean_phi_shifted, &fisher_gap(&spec, t)?)?;
    Ok(ToyMoments {
        mean_phi,
        mean_phi_shifted,
        var_phi,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyCheck {
    pub delta: f64,
    pub t: f64,
    pub draws: u64,
    pub exact: ToyMoments,
    pub sampled: ToyMoments,
    /// Standard error of the sampled variance.
    pub var_stderr: f64,
    /// `(sampled var - exact bound) / var_stderr`.
    pub margin_sigmas: f64,
}

impl ToyCheck {
    /// Largest absolute gap between sampled and exact moments.
    pub fn max_discrepancy(&self) -> f64 {
        let (a, b) = (self.exact, self.sampled);
        [
            a.mean_phi - b.mean_phi,
            a.mean_phi_shifted - b.mean_phi_shifted,
            a.var_phi - b.var_phi,
            a.bound - b.bound,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Monte Carlo estimate of the toy moments from `draws` samples of `ξ`.
pub fn monte_carlo(delta: f64, t: f64, draws: u64, seed: u64) -> Result<ToyCheck, DisorderError> {
    let spec = DisorderSpec::new("exponential", delta)?;
    let exact = closed_form(delta, t)?;
    let mut rng = seeding::stream(seed);
    let n = draws as f64;

    // Welford for the mean and the second and fourth central moments.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    let mut phis = Vec::with_capacity(draws as usize);
    let mut shifted_sum = 0.0f64;
    for k in 0..draws {
        let xi = spec.sample(&mut rng);
        let phi = (-xi).exp();
        phis.push(phi);
        shifted_sum += (-(xi + t)).exp();
        let d = phi - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (phi - mean);
    }
    let var = m2 / (n - 1.0);
    let m4 = phis.iter().map(|p| (p - mean).powi(4)).sum::<f64>() / n;
    let var_stderr = ((m4 - var * var) / n).sqrt();
    let mean_shifted = shifted_sum / n;
    let bound = hcr_bound(mean, mean_shifted, &fisher_gap(&spec, t)?)?;
    Ok(ToyCheck {
        delta,
        t,
        draws,
        exact,
        sampled: ToyMoments {
            mean_phi: mean,
            mean_phi_shifted: mean_shifted,
            var_phi: var,
            bound,
        },
        var_stderr,
        margin_sigmas: (var - exact.bound) / var_stderr,
    })
}
