//! Random one-body operator on an open chain, its Fermi projection, and the
//! entanglement entropies of a block of sites.
//!
//! `H = -Δ + V` with `(-Δu)(x) = 2u(x) - u(x-1) - u(x+1)` and Dirichlet ends,
//! so `H` is symmetric tridiagonal with diagonal `2 + V(x)` and off-diagonal
//! `-1`. For `V ≥ 0` the spectrum lies in `[0, 4 + max V]`.

mod eigen;
mod entropy;
mod projection;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{sample_site, PotentialLaw};

pub use eigen::{eigendecompose, symmetric_eigenvalues, Eigenpairs};
pub use entropy::{binary_entropy, renyi_binary, renyi_entropy, von_neumann_entropy, RenyiOrder};
pub use projection::{
    block_occupations, fermi_projection, occupation_spectrum, FermiProjection, OccupationSpectrum,
    CLAMP_TOLERANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("potential has {got} sites, chain has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("potential must be nonnegative and finite, site {site} has {value}")]
    InvalidPotential { site: usize, value: f64 },
    #[error("eigensolver failed to converge (LAPACK info = {0})")]
    ConvergenceFailure(i32),
    #[error("block occupation {value} lies outside [0, 1] beyond tolerance {tolerance}")]
    ProjectionCorrupt { value: f64, tolerance: f64 },
    #[error("Rényi order must be positive, got {0}")]
    InvalidAlpha(f64),
}

/// A set of chain sites, kept sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    sites: Vec<usize>,
}

impl Region {
    pub fn interval(start: usize, len: usize) -> Self {
        Self {
            sites: (start..start + len).collect(),
        }
    }

    pub fn from_sites(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self { sites }
    }

    /// Sites of `0..n_sites` not in `self`.
    pub fn complement(&self, n_sites: usize) -> Self {
        let mut inside = vec![false; n_sites];
        for &s in &self.sites {
            if s < n_sites {
                inside[s] = true;
            }
        }
        Self {
            sites: (0..n_sites).filter(|&x| !inside[x]).collect(),
        }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.sites.last().copied()
    }
}

/// Geometry of a finite chain: its length, the block `Λ`, the Fermi energy
/// and an optional potential shift at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub block_start: usize,
    pub block_len: usize,
    pub fermi_energy: f64,
    #[serde(default)]
    pub shift_t: f64,
    pub shift_site: usize,
}

impl ChainConfig {
    /// Block of length `block_len` centered in the chain; the shift site is
    /// the leftmost block site.
    pub fn centered(n_sites: usize, block_len: usize, fermi_energy: f64) -> Result<Self, SpectralError> {
        if block_len > n_sites {
            return Err(SpectralError::InvalidConfig(format!(
                "block length {block_len} exceeds chain length {n_sites}"
            )));
        }
        let block_start = (n_sites - block_len) / 2;
        let cfg = Self {
            n_sites,
            block_start,
            block_len,
            fermi_energy,
            shift_t: 0.0,
            shift_site: block_start,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_shift(mut self, t: f64) -> Self {
        self.shift_t = t;
        self
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let bad = |msg: String| Err(SpectralError::InvalidConfig(msg));
        if self.n_sites == 0 {
            return bad("chain must have at least one site".into());
        }
        if self.block_len == 0 {
            return bad("block must contain at least one site".into());
        }
        if self.block_start + self.block_len > self.n_sites {
            return bad(format!(
                "block [{}, {}) does not fit in a chain of {} sites",
                self.block_start,
                self.block_start + self.block_len,
                self.n_sites
            ));
        }
        if !self.fermi_energy.is_finite() {
            return bad(format!("Fermi energy must be finite, got {}", self.fermi_energy));
        }
        if !(self.shift_t >= 0.0 && self.shift_t.is_finite()) {
            return bad(format!("shift must be nonnegative and finite, got {}", self.shift_t));
        }
        if self.shift_site >= self.n_sites {
            return bad(format!(
                "shift site {} outside chain of {} sites",
                self.shift_site, self.n_sites
            ));
        }
        Ok(())
    }

    /// Whether both the block and its environment are long (`1 ≪ L` and
    /// `1 ≪ N - L`, taken as at least 10 sites each).
    pub fn in_bipartite_regime(&self) -> bool {
        self.block_len >= 10 && self.n_sites - self.block_len >= 10
    }

    pub fn block(&self) -> Region {
        Region::interval(self.block_start, self.block_len)
    }
}

/// Site potential `V(x) ≥ 0`, optionally with `V(s) → V(s) + t` at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
    shift: Option<(usize, f64)>,
}

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self, SpectralError> {
        if let Some((site, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(SpectralError::InvalidPotential { site, value });
        }
        Ok(Self { values, shift: None })
    }

    pub fn zeros(n_sites: usize) -> Self {
        Self {
            values: vec![0.0; n_sites],
            shift: None,
        }
    }

    /// Draws `n_sites` i.i.d. site values from `law`.
    pub fn sample<L: PotentialLaw + ?Sized, R: Rng + ?Sized>(
        law: &L,
        n_sites: usize,
        rng: &mut R,
    ) -> Result<Self, SpectralError> {
        Self::new((0..n_sites).map(|_| sample_site(law, rng)).collect())
    }

    pub fn with_shift(mut self, site: usize, t: f64) -> Result<Self, SpectralError> {
        if site >= self.values.len() {
            return Err(SpectralError::InvalidConfig(format!(
                "shift site {site} outside chain of {} sites",
                self.values.len()
            )));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(SpectralError::InvalidConfig(format!("invalid shift {t}")));
        }
        self.shift = (t > 0.0).then_some((site, t));
        Ok(self)
    }

    /// Applies the shift configured in `cfg`, if any.
    pub fn configured(self, cfg: &ChainConfig) -> Result<Self, SpectralError> {
        if self.values.len() != cfg.n_sites {
            return Err(SpectralError::LengthMismatch {
                expected: cfg.n_sites,
                got: self.values.len(),
            });
        }
        self.with_shift(cfg.shift_site, cfg.shift_t)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shift(&self) -> Option<(usize, f64)> {
        self.shift
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Real symmetric tridiagonal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator1D {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
}

impl Operator1D {
    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// The operator with row and column `site` deleted. The two neighbours of
    /// the removed site become adjacent with zero coupling.
    pub fn without_site(&self, site: usize) -> Self {
        let n = self.len();
        assert!(site < n, "site {site} out of range for {n} sites");
        let mut diagonal = self.diagonal.clone();
        diagonal.remove(site);
        let mut off_diagonal = Vec::with_capacity(n.saturating_sub(2));
        for i in 0..n.saturating_sub(1) {
            if i + 1 == site {
                // bond (site-1, site) is replaced by the join (site-1, site+1)
                if site + 1 < n {
                    off_diagonal.push(0.0);
                }
            } else if i == site {
                continue;
            } else {
                off_diagonal.push(self.off_diagonal[i]);
            }
        }
        Self {
            diagonal,
            off_diagonal,
        }
    }

    /// `‖H‖_∞`, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off_diagonal[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off_diagonal[i].abs() } else { 0.0 };
                self.diagonal[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * x[i];
                if i > 0 {
                    y += self.off_diagonal[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off_diagonal[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

pub fn build_operator(potential: &Potential) -> Operator1D {
    let mut diagonal: Vec<f64> = potential.values.iter().map(|v| 2.0 + v).collect();
    if let Some((site, t)) = potential.shift {
        diagonal[site] += t;
    }
    let off_diagonal = vec![-1.0; potential.len().saturating_sub(1)];
    Operator1D {
        diagonal,
        off_diagonal,
    }
}

/// Entropy of the block in `cfg` for one potential.
pub fn potential_entropy(
    potential: &Potential,
    cfg: &ChainConfig,
    alpha: RenyiOrder,
) -> Result<f64, SpectralError> {
    let eig = eigendecompose(&build_operator(potential))?;
    let occ = block_occupations(&eig, cfg.fermi_energy, &cfg.block())?;
    renyi_entropy(&occ, alpha)
}

/// One disorder realization: sample `V`, apply the configured shift, and
/// return the block entropy.
pub fn block_entropy<L: PotentialLaw + ?Sized, R: Rng + ?Sized>(
    law: &L,
    cfg: &ChainConfig,
    alpha: RenyiOrder,
    rng: &mut R,
) -> Result<f64, SpectralError> {
    cfg.validate()?;
    let potential = Potential::sample(law, cfg.n_sites, rng)?.configured(cfg)?;
    potential_entropy(&potential, cfg, alpha)
}
