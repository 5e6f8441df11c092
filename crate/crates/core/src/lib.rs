//! Disorder-ensemble entanglement entropy of one-dimensional free fermions.
//!
//! The one-body Hamiltonian is the discrete Schrödinger operator `H = -Δ + V`
//! on an open chain with i.i.d. nonnegative site potential. For each
//! realization the ground-state entanglement of a block is a function of the
//! eigenvalues of the block-restricted Fermi projection. On top of that the
//! crate provides localization radii from the transfer-matrix cocycle,
//! ensemble statistics, and the Hammersley–Chapman–Robbins lower bound on the
//! entropy's coefficient of variation.

pub mod commands;
pub mod config;
pub mod disorder;
pub mod ensemble;
pub mod hcr_toy;
pub mod lyapunov;
pub mod output;
pub mod quadrature;
pub mod seeding;
pub mod spectral;

pub use disorder::{DisorderFamily, DisorderSpec, FisherGap, PotentialLaw, ZeroPotential};
pub use lyapunov::{LyapunovOptions, LyapunovResult};
pub use spectral::{ChainConfig, OccupationSpectrum, Potential, Region, RenyiOrder};
