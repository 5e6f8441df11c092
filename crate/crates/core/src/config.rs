//! Run configuration: TOML file, command-line overrides and profiles, resolved
//! into one validated [`RunConfig`].
//!
//! File grammar (every key optional):
//!
//! ```toml
//! command = "density"
//! master_seed = 1
//!
//! [disorder]
//! family = "exponential"      # uniform | exponential | half-cauchy
//! delta = 1.0
//!
//! [chain]
//! n_sites = 5000
//! block_len = 2500            # default n_sites / 2
//! block_start = 1250          # default: block centered
//! shift_site = 1250           # default: leftmost block site
//! fermi_energy = 1.0
//!
//! [ensemble]
//! n_realizations = 2000
//! alpha = 1.0                 # Rényi order, or "inf"
//! bins = 40                   # default scales as n^(1/3)
//! workers = 4                 # not part of the result
//!
//! [grids]
//! block_lengths = [51, 101, 201]
//! shifts = [0.1, 1.0, 10.0]
//! energies = [1.0]
//! families = ["exponential", "half-cauchy"]
//! deltas = [0.2, 0.4]
//!
//! [lyapunov]
//! n_steps = 10000000
//! n_batches = 100
//! renormalize_every = 1
//!
//! [selftest]
//! delta = 1.0
//! shift = 1.0
//! draws = 1000000
//!
//! [output]
//! path = "out.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{lookup, DisorderSpec};
use crate::ensemble::default_t_grid;
use crate::lyapunov::{LyapunovOptions, MIN_STEPS};
use crate::spectral::{ChainConfig, RenyiOrder};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid configuration at `{key}`: {reason}")]
pub struct ValidationError {
    pub key: String,
    pub reason: String,
}

impl ValidationError {
    fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

const ROOT_KEYS: &[&str] = &["command", "master_seed"];
const SECTIONS: &[(&str, &[&str])] = &[
    ("disorder", &["family", "delta"]),
    ("chain", &["n_sites", "block_len", "block_start", "shift_site", "fermi_energy"]),
    ("ensemble", &["n_realizations", "alpha", "bins", "workers"]),
    ("grids", &["block_lengths", "shifts", "energies", "families", "deltas"]),
    ("lyapunov", &["n_steps", "n_batches", "renormalize_every"]),
    ("selftest", &["delta", "shift", "draws"]),
    ("output", &["path"]),
];

/// Base defaults before file keys and flags are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// `E = 1`, `n = 2000`, `N = 5000`, `L = 2500`.
    #[default]
    Standard,
    /// `N = 1000`, `L = 500`, `n = 200`, `10^6` transfer steps.
    Quick,
    /// Standard, with `N = 10000` for length scans.
    Paper,
}

/// Partially specified configuration. File and flag layers both produce one;
/// later layers win key by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<String>,
    pub master_seed: Option<u64>,
    pub family: Option<String>,
    pub delta: Option<f64>,
    pub n_sites: Option<usize>,
    pub block_len: Option<usize>,
    pub block_start: Option<usize>,
    pub shift_site: Option<usize>,
    pub fermi_energy: Option<f64>,
    pub n_realizations: Option<usize>,
    pub alpha: Option<RenyiOrder>,
    pub bins: Option<usize>,
    pub workers: Option<usize>,
    pub block_lengths: Option<Vec<usize>>,
    pub shifts: Option<Vec<f64>>,
    pub energies: Option<Vec<f64>>,
    pub families: Option<Vec<String>>,
    pub deltas: Option<Vec<f64>>,
    pub lyapunov_steps: Option<u64>,
    pub lyapunov_batches: Option<usize>,
    pub renormalize_every: Option<u32>,
    pub selftest_delta: Option<f64>,
    pub selftest_shift: Option<f64>,
    pub selftest_draws: Option<u64>,
    pub output: Option<PathBuf>,
}

macro_rules! layer {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field; } )*
    };
}

impl Overrides {
    /// `other` wins wherever it sets a key.
    pub fn layered(mut self, other: Overrides) -> Self {
        layer!(self, other; command, master_seed, family, delta, n_sites, block_len, block_start,
            shift_site, fermi_energy, n_realizations, alpha, bins, workers, block_lengths, shifts,
            energies, families, deltas, lyapunov_steps, lyapunov_batches, renormalize_every,
            selftest_delta, selftest_shift, selftest_draws, output);
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ValidationError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ValidationError::new("<file>", e.message().to_string()))?;
        check_keys(&table)?;
        let root = |key: &str| table.get(key);
        let sec = |s: &str, key: &str| table.get(s).and_then(|v| v.as_table()).and_then(|t| t.get(key));

        Ok(Self {
            command: typed("command", root("command"))?,
            master_seed: typed("master_seed", root("master_seed"))?,
            family: typed("disorder.family", sec("disorder", "family"))?,
            delta: typed("disorder.delta", sec("disorder", "delta"))?,
            n_sites: typed("chain.n_sites", sec("chain", "n_sites"))?,
            block_len: typed("chain.block_len", sec("chain", "block_len"))?,
            block_start: typed("chain.block_start", sec("chain", "block_start"))?,
            shift_site: typed("chain.shift_site", sec("chain", "shift_site"))?,
            fermi_energy: typed("chain.fermi_energy", sec("chain", "fermi_energy"))?,
            n_realizations: typed("ensemble.n_realizations", sec("ensemble", "n_realizations"))?,
            alpha: typed("ensemble.alpha", sec("ensemble", "alpha"))?,
            bins: typed("ensemble.bins", sec("ensemble", "bins"))?,
            workers: typed("ensemble.workers", sec("ensemble", "workers"))?,
            block_lengths: typed("grids.block_lengths", sec("grids", "block_lengths"))?,
            shifts: typed("grids.shifts", sec("grids", "shifts"))?,
            energies: typed("grids.energies", sec("grids", "energies"))?,
            families: typed("grids.families", sec("grids", "families"))?,
            deltas: typed("grids.deltas", sec("grids", "deltas"))?,
            lyapunov_steps: typed("lyapunov.n_steps", sec("lyapunov", "n_steps"))?,
            lyapunov_batches: typed("lyapunov.n_batches", sec("lyapunov", "n_batches"))?,
            renormalize_every: typed("lyapunov.renormalize_every", sec("lyapunov", "renormalize_every"))?,
            selftest_delta: typed("selftest.delta", sec("selftest", "delta"))?,
            selftest_shift: typed("selftest.shift", sec("selftest", "shift"))?,
            selftest_draws: typed("selftest.draws", sec("selftest", "draws"))?,
            output: typed("output.path", sec("output", "path"))?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ValidationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

fn check_keys(table: &toml::Table) -> Result<(), ValidationError> {
    for (key, value) in table {
        if ROOT_KEYS.contains(&key.as_str()) {
            continue;
        }
        let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == key) else {
            return Err(ValidationError::new(key.as_str(), "unknown key"));
        };
        let inner = value
            .as_table()
            .ok_or_else(|| ValidationError::new(key.as_str(), "expected a section"))?;
        if let Some(bad) = inner.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ValidationError::new(format!("{key}.{bad}"), "unknown key"));
        }
    }
    Ok(())
}

fn typed<T: DeserializeOwned>(key: &str, value: Option<&toml::Value>) -> Result<Option<T>, ValidationError> {
    value
        .map(|v| v.clone().try_into::<T>().map_err(|e| ValidationError::new(key, e.message().to_string())))
        .transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub block_lengths: Vec<usize>,
    pub shifts: Vec<f64>,
    pub energies: Vec<f64>,
    pub families: Vec<String>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSettings {
    pub n_steps: u64,
    pub n_batches: usize,
    pub renormalize_every: u32,
}

impl LyapunovSettings {
    pub fn options(&self) -> LyapunovOptions {
        LyapunovOptions {
            n_steps: self.n_steps,
            n_batches: self.n_batches,
            renormalize_every: self.renormalize_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestSettings {
    pub delta: f64,
    pub shift: f64,
    pub draws: u64,
}

/// Fully resolved, validated configuration. Its JSON form is the metadata
/// echoed into every output file and is enough to rerun the job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub master_seed: u64,
    pub disorder: DisorderSpec,
    pub chain: ChainConfig,
    pub alpha: RenyiOrder,
    pub n_realizations: usize,
    pub bins: Option<usize>,
    pub grids: Grids,
    pub lyapunov: LyapunovSettings,
    pub selftest: SelftestSettings,
    /// Does not affect results, so it is not echoed.
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;
pub const TABLE_DELTAS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
const SCAN_LENGTHS: [usize; 14] = [11, 21, 51, 101, 201, 301, 501, 701, 1001, 1501, 2001, 2501, 3501, 5001];

/// Block lengths `2M + 1` of the default length scan that fit in the chain.
pub fn default_block_lengths(n_sites: usize) -> Vec<usize> {
    SCAN_LENGTHS.iter().copied().filter(|&l| l < n_sites).collect()
}

impl RunConfig {
    /// Applies `layers` over the profile defaults and validates the result.
    /// `known_commands` is the command registry.
    pub fn resolve(profile: Profile, layers: Overrides, known_commands: &[&str]) -> Result<Self, ValidationError> {
        let o = layers;
        let command = o
            .command
            .ok_or_else(|| ValidationError::new("command", "no command given"))?;
        if !known_commands.contains(&command.as_str()) {
            return Err(ValidationError::new(
                "command",
                format!("unknown command {command:?}; expected one of {}", known_commands.join(", ")),
            ));
        }

        let (n_default, n_real_default, steps_default) = match profile {
            Profile::Standard => (5000, 2000, 10_000_000),
            Profile::Quick => (1000, 200, 1_000_000),
            Profile::Paper if command == "entropy-scan" => (10_000, 2000, 10_000_000),
            Profile::Paper => (5000, 2000, 10_000_000),
        };

        let family = o.family.unwrap_or_else(|| "exponential".into());
        let delta = o.delta.unwrap_or(1.0);
        lookup(&family).map_err(|e| ValidationError::new("disorder.family", e.to_string()))?;
        let disorder =
            DisorderSpec::new(&family, delta).map_err(|e| ValidationError::new("disorder.delta", e.to_string()))?;

        let n_sites = o.n_sites.unwrap_or(n_default);
        if n_sites < 2 {
            return Err(ValidationError::new("chain.n_sites", "chain needs at least two sites"));
        }
        let block_len = o.block_len.unwrap_or(n_sites / 2);
        if block_len == 0 {
            return Err(ValidationError::new("chain.block_len", "block must contain at least one site"));
        }
        if block_len > n_sites {
            return Err(ValidationError::new(
                "chain.block_len",
                format!("block length {block_len} exceeds chain length {n_sites}"),
            ));
        }
        let fermi_energy = o.fermi_energy.unwrap_or(1.0);
        if !fermi_energy.is_finite() {
            return Err(ValidationError::new("chain.fermi_energy", "must be finite"));
        }
        let block_start = o.block_start.unwrap_or((n_sites - block_len) / 2);
        if block_start + block_len > n_sites {
            return Err(ValidationError::new("chain.block_start", "block does not fit in the chain"));
        }
        let shift_site = o.shift_site.unwrap_or(block_start);
        if shift_site >= n_sites {
            return Err(ValidationError::new("chain.shift_site", "outside the chain"));
        }
        let chain = ChainConfig {
            n_sites,
            block_start,
            block_len,
            fermi_energy,
            shift_t: 0.0,
            shift_site,
        };

        let n_realizations = o.n_realizations.unwrap_or(n_real_default);
        if n_realizations < 2 {
            return Err(ValidationError::new("ensemble.n_realizations", "need at least 2 realizations"));
        }
        if o.bins == Some(0) {
            return Err(ValidationError::new("ensemble.bins", "need at least one bin"));
        }
        if o.workers == Some(0) {
            return Err(ValidationError::new("ensemble.workers", "need at least one worker"));
        }

        let block_lengths = o.block_lengths.unwrap_or_else(|| default_block_lengths(n_sites));
        if let Some(&l) = block_lengths.iter().find(|&&l| l == 0 || l > n_sites) {
            return Err(ValidationError::new(
                "grids.block_lengths",
                format!("block length {l} must lie in 1..={n_sites}"),
            ));
        }
        let shifts = o.shifts.unwrap_or_else(|| default_t_grid(delta));
        if shifts.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(ValidationError::new("grids.shifts", "shifts must be positive and finite"));
        }
        let energies = o.energies.unwrap_or_else(|| vec![1.0]);
        if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
            return Err(ValidationError::new("grids.energies", "need finite energies"));
        }
        let families = o.families.unwrap_or_else(|| {
            crate::disorder::families()
                .iter()
                .map(|f| f.name().to_string())
                .collect()
        });
        if let Some(bad) = families.iter().find(|f| lookup(f).is_err()) {
            return Err(ValidationError::new("grids.families", format!("unknown family {bad:?}")));
        }
        let deltas = o.deltas.unwrap_or_else(|| TABLE_DELTAS.to_vec());
        if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(ValidationError::new("grids.deltas", "disorder strengths must be positive"));
        }

        let lyapunov = LyapunovSettings {
            n_steps: o.lyapunov_steps.unwrap_or(steps_default),
            n_batches: o.lyapunov_batches.unwrap_or(100),
            renormalize_every: o.renormalize_every.unwrap_or(1),
        };
        if lyapunov.n_steps < MIN_STEPS {
            return Err(ValidationError::new("lyapunov.n_steps", format!("need at least {MIN_STEPS}")));
        }
        if lyapunov.n_batches < 2 {
            return Err(ValidationError::new("lyapunov.n_batches", "need at least 2 batches"));
        }
        if lyapunov.renormalize_every == 0 {
            return Err(ValidationError::new("lyapunov.renormalize_every", "must be at least 1"));
        }

        let selftest = SelftestSettings {
            delta: o.selftest_delta.unwrap_or(1.0),
            shift: o.selftest_shift.unwrap_or(1.0),
            draws: o.selftest_draws.unwrap_or(1_000_000),
        };
        if !(selftest.delta > 0.0 && selftest.delta.is_finite()) {
            return Err(ValidationError::new("selftest.delta", "must be positive"));
        }
        if !(selftest.shift > 0.0 && selftest.shift.is_finite()) {
            return Err(ValidationError::new("selftest.shift", "must be positive"));
        }
        if selftest.draws < 2 {
            return Err(ValidationError::new("selftest.draws", "need at least 2 draws"));
        }

        Ok(Self {
            command,
            master_seed: o.master_seed.unwrap_or(DEFAULT_SEED),
            disorder,
            chain,
            alpha: o.alpha.unwrap_or(RenyiOrder::VON_NEUMANN),
            n_realizations,
            bins: o.bins,
            grids: Grids {
                block_lengths,
                shifts,
                energies,
                families,
                deltas,
            },
            lyapunov,
            selftest,
            workers: o.workers,
            output: o.output,
        })
    }
}
