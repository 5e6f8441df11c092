//! LAPACK-backed symmetric eigensolvers.

use std::sync::Once;

use ndarray::{Array2, ShapeBuilder};

use super::{Operator1D, SpectralError};

// Links the system OpenBLAS, which also provides LAPACK.
extern crate openblas_src;

extern "C" {
    fn openblas_set_num_threads(num_threads: std::os::raw::c_int);
}

static SINGLE_THREADED: Once = Once::new();

/// Parallelism comes from running realizations concurrently; BLAS threads on
/// top of that only oversubscribe the machine.
pub(crate) fn init_blas() {
    SINGLE_THREADED.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// All eigenpairs of a symmetric tridiagonal operator.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the normalized eigenvector of `values[k]`.
    pub vectors: Array2<f64>,
}

impl Eigenpairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of eigenvalues strictly below `energy`.
    pub fn count_below(&self, energy: f64) -> usize {
        self.values.partition_point(|&l| l < energy)
    }

    /// Column-major storage of the eigenvector matrix.
    pub(crate) fn column_major(&self) -> &[f64] {
        self.vectors
            .as_slice_memory_order()
            .expect("eigenvectors are stored contiguously")
    }
}

/// Divide-and-conquer tridiagonal eigensolver (`dstevd`).
pub fn eigendecompose(op: &Operator1D) -> Result<Eigenpairs, SpectralError> {
    init_blas();
    let n = op.len();
    if n == 0 {
        return Ok(Eigenpairs {
            values: Vec::new(),
            vectors: Array2::zeros((0, 0).f()),
        });
    }
    if op.off_diagonal.len() + 1 != n {
        return Err(SpectralError::LengthMismatch {
            expected: n - 1,
            got: op.off_diagonal.len(),
        });
    }
    let mut d = op.diagonal.clone();
    let mut e = op.off_diagonal.clone();
    e.push(0.0);
    let mut z = vec![0.0; n * n];
    let lwork = 1 + 4 * n + n * n;
    let liwork = 3 + 5 * n;
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0i32; liwork];
    let mut info = 0;
    let n32 = i32::try_from(n).map_err(|_| SpectralError::InvalidConfig("chain too long".into()))?;
    unsafe {
        lapack::dstevd(
            b'V',
            n32,
            &mut d,
            &mut e,
            &mut z,
            n32,
            &mut work,
            lwork as i32,
            &mut iwork,
            liwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(SpectralError::ConvergenceFailure(info));
    }
    let vectors = Array2::from_shape_vec((n, n).f(), z).expect("shape matches buffer");
    Ok(Eigenpairs { values: d, vectors })
}

/// Eigenvalues (ascending) of the dense symmetric `n × n` matrix stored
/// column-major in `a`; only the upper triangle is read.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>, SpectralError> {
    init_blas();
    assert_eq!(a.len(), n * n, "matrix buffer does not match dimension");
    if n == 0 {
        return Ok(Vec::new());
    }
    let n32 = n as i32;
    let mut w = vec![0.0; n];
    let mut query = [0.0];
    let mut info = 0;
    unsafe {
        lapack::dsyev(b'N', b'U', n32, &mut a, n32, &mut w, &mut query, -1, &mut info);
    }
    let lwork = (query[0] as usize).max(3 * n);
    let mut work = vec![0.0; lwork];
    unsafe {
        lapack::dsyev(b'N', b'U', n32, &mut a, n32, &mut w, &mut work, lwork as i32, &mut info);
    }
    if info != 0 {
        return Err(SpectralError::ConvergenceFailure(info));
    }
    Ok(w)
}

/// `C = A Aᵀ` (`transpose = false`, `C` is `rows × rows`) or `C = Aᵀ A`
/// (`transpose = true`, `C` is `cols × cols`) for column-major `A`. Only the
/// upper triangle of `C` is filled.
pub(crate) fn gram(a: &[f64], rows: usize, cols: usize, transpose: bool) -> Vec<f64> {
    init_blas();
    let (dim, inner, trans) = if transpose {
        (cols, rows, b'T')
    } else {
        (rows, cols, b'N')
    };
    let mut c = vec![0.0; dim * dim];
    if dim == 0 || inner == 0 {
        return c;
    }
    unsafe {
        blas::dsyrk(
            b'U',
            trans,
            dim as i32,
            inner as i32,
            1.0,
            a,
            rows.max(1) as i32,
            0.0,
            &mut c,
            dim as i32,
        );
    }
    c
}
