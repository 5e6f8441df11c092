//! Fermi projection and its restriction to a block.

use ndarray::{Array2, ShapeBuilder};

use super::eigen::{gram, symmetric_eigenvalues, Eigenpairs};
use super::{Region, SpectralError};

/// Raw block eigenvalues outside `[-tol, 1 + tol]` mean the projection is
/// numerically broken rather than merely rounded.
pub const CLAMP_TOLERANCE: f64 = 1e-6;

/// `P = Σ_{λ_k < E} ψ_k ψ_kᵀ`.
#[derive(Debug, Clone)]
pub struct FermiProjection {
    pub matrix: Array2<f64>,
    pub n_occupied: usize,
}

impl FermiProjection {
    pub fn n_sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().sum()
    }

    /// `‖P² - P‖_F / √N`.
    pub fn idempotency_defect(&self) -> f64 {
        let p2 = self.matrix.dot(&self.matrix);
        let n = self.n_sites().max(1) as f64;
        (&p2 - &self.matrix).mapv(|x| x * x).sum().sqrt() / n.sqrt()
    }
}

/// Eigenvalues of the block-restricted Fermi projection, clamped to `[0, 1]`
/// and sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSpectrum {
    values: Vec<f64>,
}

impl OccupationSpectrum {
    /// Validates raw eigenvalues against [`CLAMP_TOLERANCE`] and clamps them.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self, SpectralError> {
        let mut values = raw;
        for v in values.iter_mut() {
            if !(*v >= -CLAMP_TOLERANCE && *v <= 1.0 + CLAMP_TOLERANCE) {
                return Err(SpectralError::ProjectionCorrupt {
                    value: *v,
                    tolerance: CLAMP_TOLERANCE,
                });
            }
            *v = v.clamp(0.0, 1.0);
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn fermi_projection(eig: &Eigenpairs, fermi_energy: f64) -> FermiProjection {
    let n = eig.len();
    let k = eig.count_below(fermi_energy);
    // The first k columns of the column-major eigenvector matrix are exactly
    // the occupied orbitals.
    let occupied = &eig.column_major()[..n * k];
    let upper = gram(occupied, n, k, false);
    let mut matrix = Array2::from_shape_vec((n, n).f(), upper).expect("shape matches buffer");
    for j in 0..n {
        for i in j + 1..n {
            matrix[[i, j]] = matrix[[j, i]];
        }
    }
    FermiProjection {
        matrix,
        n_occupied: k,
    }
}

/// Occupation spectrum of `P` restricted to `region`, from the dense block.
pub fn occupation_spectrum(p: &FermiProjection, region: &Region) -> Result<OccupationSpectrum, SpectralError> {
    check_region(region, p.n_sites())?;
    let sites = region.sites();
    let l = sites.len();
    let mut block = vec![0.0; l * l];
    for (j, &y) in sites.iter().enumerate() {
        for (i, &x) in sites.iter().enumerate() {
            block[i + j * l] = p.matrix[[x, y]];
        }
    }
    OccupationSpectrum::from_raw(symmetric_eigenvalues(block, l)?)
}

/// Occupation spectrum of the block straight from the eigenpairs, without
/// forming `P`.
///
/// With `A` the block rows of the `k` occupied orbitals, `P_Λ = A Aᵀ` shares
/// its nonzero spectrum with the `k × k` Gram matrix `Aᵀ A`; likewise the
/// `N - k` empty orbitals give `1 - P_Λ`. The smallest of the three
/// eigenproblems is solved and the remaining occupations are exact zeros or
/// ones.
pub fn block_occupations(
    eig: &Eigenpairs,
    fermi_energy: f64,
    region: &Region,
) -> Result<OccupationSpectrum, SpectralError> {
    let n = eig.len();
    check_region(region, n)?;
    let l = region.len();
    let k = eig.count_below(fermi_energy);
    if k == 0 {
        return Ok(OccupationSpectrum { values: vec![0.0; l] });
    }
    if k == n {
        return Ok(OccupationSpectrum { values: vec![1.0; l] });
    }
    if l == n {
        // The whole chain is in a pure state.
        let mut values = vec![1.0; k];
        values.resize(n, 0.0);
        return Ok(OccupationSpectrum { values });
    }
    let empty = n - k;
    let z = eig.column_major();
    let gather = |cols: std::ops::Range<usize>| {
        let width = cols.len();
        let mut a = vec![0.0; l * width];
        for (c, col) in cols.enumerate() {
            let src = &z[col * n..(col + 1) * n];
            let dst = &mut a[c * l..(c + 1) * l];
            for (d, &site) in dst.iter_mut().zip(region.sites()) {
                *d = src[site];
            }
        }
        a
    };

    let raw = if l <= k.min(empty) {
        let a = gather(0..k);
        symmetric_eigenvalues(gram(&a, l, k, false), l)?
    } else if k <= empty {
        let a = gather(0..k);
        let mut w = symmetric_eigenvalues(gram(&a, l, k, true), k)?;
        w.resize(l, 0.0);
        w
    } else {
        let b = gather(k..n);
        let mut w: Vec<f64> = symmetric_eigenvalues(gram(&b, l, empty, true), empty)?
            .into_iter()
            .map(|mu| 1.0 - mu)
            .collect();
        w.resize(l, 1.0);
        w
    };
    OccupationSpectrum::from_raw(raw)
}

fn check_region(region: &Region, n_sites: usize) -> Result<(), SpectralError> {
    match region.max_site() {
        Some(m) if m >= n_sites => Err(SpectralError::InvalidConfig(format!(
            "block site {m} outside chain of {n_sites} sites"
        ))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_operator, eigendecompose, Potential};
    use approx::assert_abs_diff_eq;

    fn free(n: usize) -> Eigenpairs {
        eigendecompose(&build_operator(&Potential::zeros(n))).unwrap()
    }

    #[test]
    fn empty_and_full_fermi_sea() {
        let eig = free(5);
        let p = fermi_projection(&eig, -1.0);
        assert_eq!(p.n_occupied, 0);
        assert!(p.matrix.iter().all(|&x| x == 0.0));
        let p = fermi_projection(&eig, 10.0);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(p.matrix[[i, j]], want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn dimer_half_filling() {
        let eig = free(2);
        let p = fermi_projection(&eig, 2.0);
        for x in p.matrix.iter() {
            assert_abs_diff_eq!(*x, 0.5, epsilon = 1e-14);
        }
        let occ = occupation_spectrum(&p, &Region::interval(0, 1)).unwrap();
        assert_abs_diff_eq!(occ.values()[0], 0.5, epsilon = 1e-14);
        let fast = block_occupations(&eig, 2.0, &Region::interval(0, 1)).unwrap();
        assert_abs_diff_eq!(fast.values()[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn strict_inequality_at_the_fermi_level() {
        // Free dimer eigenvalues are exactly 1 and 3.
        let eig = free(2);
        assert_eq!(fermi_projection(&eig, eig.values[0]).n_occupied, 0);
    }

    #[test]
    fn whole_chain_block_is_pure() {
        let eig = free(9);
        let p = fermi_projection(&eig, 2.0);
        let occ = occupation_spectrum(&p, &Region::interval(0, 9)).unwrap();
        let ones = occ.values().iter().filter(|&&v| (v - 1.0).abs() < 1e-8).count();
        let zeros = occ.values().iter().filter(|&&v| v.abs() < 1e-8).count();
        assert_eq!(ones, p.n_occupied);
        assert_eq!(ones + zeros, 9);
    }

    #[test]
    fn zero_projection_block_is_empty() {
        let eig = free(6);
        let p = fermi_projection(&eig, 0.0);
        let occ = occupation_spectrum(&p, &Region::interval(1, 3)).unwrap();
        assert_eq!(occ.values(), &[0.0, 0.0, 0.0]);
        let fast = block_occupations(&eig, 0.0, &Region::interval(1, 3)).unwrap();
        assert_eq!(fast.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn corrupt_occupations_are_rejected() {
        assert!(matches!(
            OccupationSpectrum::from_raw(vec![0.5, 1.0 + 1e-3]),
            Err(SpectralError::ProjectionCorrupt { .. })
        ));
        let ok = OccupationSpectrum::from_raw(vec![-1e-9, 0.3, 1.0 + 1e-9]).unwrap();
        assert_eq!(ok.values(), &[1.0, 0.3, 0.0]);
    }

    #[test]
    fn block_outside_chain_is_an_error() {
        let eig = free(4);
        assert!(block_occupations(&eig, 2.0, &Region::interval(2, 3)).is_err());
    }
}
