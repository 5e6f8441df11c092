//! Sample statistics: moments, jackknife errors, histograms.

use serde::Serialize;

use super::EnsembleError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_realizations: usize,
    pub mean: f64,
    /// Unbiased.
    pub variance: f64,
    /// `√variance / mean`; zero when the variance is.
    pub coeff_variation: f64,
    pub stderr_mean: f64,
    /// Leave-one-out jackknife; NaN for two samples.
    pub stderr_cv: f64,
}

fn cv_of(mean: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        0.0
    } else {
        variance.sqrt() / mean
    }
}

/// Jackknife standard error from leave-one-out replicates.
pub fn jackknife_stderr(replicates: &[f64]) -> f64 {
    let n = replicates.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = replicates.iter().sum::<f64>() / n as f64;
    let ss: f64 = replicates.iter().map(|r| (r - m).powi(2)).sum();
    ((n - 1) as f64 / n as f64 * ss).sqrt()
}

/// Leave-one-out means of `samples`.
pub fn leave_one_out_means(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let total: f64 = samples.iter().sum();
    samples.iter().map(|x| (total - x) / (n - 1) as f64).collect()
}

/// Leave-one-out coefficients of variation, `O(n)` from centered moments.
pub fn leave_one_out_cvs(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let q: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    let nf = n as f64;
    samples
        .iter()
        .map(|x| {
            let d = x - mean;
            let m_i = mean - d / (nf - 1.0);
            let var_i = ((q - d * d * nf / (nf - 1.0)) / (nf - 2.0)).max(0.0);
            cv_of(m_i, var_i)
        })
        .collect()
}

pub fn statistics(samples: &[f64]) -> Result<EnsembleStats, EnsembleError> {
    let n = samples.len();
    if n < 2 {
        return Err(EnsembleError::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let coeff_variation = cv_of(mean, variance);
    let stderr_mean = (variance / nf).sqrt();
    let stderr_cv = if variance == 0.0 {
        0.0
    } else if n < 3 {
        f64::NAN
    } else {
        jackknife_stderr(&leave_one_out_cvs(samples))
    };
    Ok(EnsembleStats {
        n_realizations: n,
        mean,
        variance,
        coeff_variation,
        stderr_mean,
        stderr_cv,
    })
}

/// Equal-width histogram normalized to unit area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub n_samples: usize,
}

impl DensityEstimate {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.density
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

/// Normal density with moments pinned to the sample mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
    /// `max_bins |density - gaussian(center)| / max density`.
    pub fit_error: f64,
}

impl GaussianFit {
    pub fn density_at(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

pub const MIN_DENSITY_SAMPLES: usize = 50;

/// 40 bins at 2000 samples, scaled as `n^{1/3}`.
pub fn default_bins(n_samples: usize) -> usize {
    ((40.0 * (n_samples as f64 / 2000.0).cbrt()).round() as usize).max(5)
}

pub fn density_estimate(samples: &[f64], n_bins: usize) -> Result<(DensityEstimate, GaussianFit), EnsembleError> {
    let n = samples.len();
    if n < MIN_DENSITY_SAMPLES {
        return Err(EnsembleError::TooFewSamples {
            needed: MIN_DENSITY_SAMPLES,
            got: n,
        });
    }
    if n_bins == 0 {
        return Err(EnsembleError::InvalidArgument("histogram needs at least one bin".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(EnsembleError::DegenerateSample);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &x in samples {
        let b = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + i as f64 * width })
        .collect();
    let density: Vec<f64> = counts
        .iter()
        .zip(bin_edges.windows(2))
        .map(|(&c, w)| c as f64 / (n as f64 * (w[1] - w[0])))
        .collect();
    let est = DensityEstimate {
        bin_edges,
        density,
        n_samples: n,
    };

    let stats = statistics(samples)?;
    let mut fit = GaussianFit {
        mu: stats.mean,
        sigma: stats.variance.sqrt(),
        fit_error: 0.0,
    };
    let peak = est.density.iter().copied().fold(0.0, f64::max);
    fit.fit_error = est
        .bin_centers()
        .iter()
        .zip(&est.density)
        .map(|(&c, &d)| (d - fit.density_at(c)).abs())
        .fold(0.0, f64::max)
        / peak;
    Ok((est, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn statistics_examples() {
        let s = statistics(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.coeff_variation), (1.0, 0.0, 0.0));
        assert_eq!(s.stderr_cv, 0.0);

        let s = statistics(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 2.0));
        assert_abs_diff_eq!(s.coeff_variation, 2f64.sqrt(), epsilon = 1e-15);

        let s = statistics(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.coeff_variation), (2.0, 1.0, 0.5));

        assert!(matches!(statistics(&[1.0]), Err(EnsembleError::TooFewSamples { .. })));
    }

    #[test]
    fn fast_leave_one_out_matches_brute_force() {
        let xs = [0.3, 1.7, 0.9, 2.2, 1.1, 0.4];
        let fast = leave_one_out_cvs(&xs);
        for i in 0..xs.len() {
            let rest: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x).collect();
            let s = statistics(&rest).unwrap();
            assert_abs_diff_eq!(fast[i], s.coeff_variation, epsilon = 1e-12);
        }
    }

    #[test]
    fn jackknife_of_the_mean_is_the_textbook_stderr() {
        let xs = [0.3, 1.7, 0.9, 2.2, 1.1, 0.4];
        let s = statistics(&xs).unwrap();
        assert_abs_diff_eq!(jackknife_stderr(&leave_one_out_means(&xs)), s.stderr_mean, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_stream_fits_within_three_percent() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                1.5 + 0.3 * z
            })
            .collect();
        let (est, fit) = density_estimate(&xs, 40).unwrap();
        assert_abs_diff_eq!(est.total_mass(), 1.0, epsilon = 1e-9);
        assert!(fit.fit_error < 0.03, "fit error {}", fit.fit_error);
        assert!(est.density.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn density_preconditions() {
        assert!(matches!(
            density_estimate(&[1.0; 60], 10),
            Err(EnsembleError::DegenerateSample)
        ));
        assert!(matches!(
            density_estimate(&[1.0; 40], 10),
            Err(EnsembleError::TooFewSamples { needed: 50, got: 40 })
        ));
    }

    #[test]
    fn bin_rule() {
        assert_eq!(default_bins(2000), 40);
        assert_eq!(default_bins(16_000), 80);
    }
}
