//! Sparse and dense complex linear algebra helpers on top of faer.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Compressed sparse row matrix with complex entries.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<C64>,
}

impl CsrMatrix {
    /// Builds the matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, C64)>) -> Self {
        trips.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or(ZERO)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Sesquilinear pairing `conj(y)^T A x`.
    pub fn pair(&self, x: &[C64], y: &[C64]) -> C64 {
        let ax = self.mul_vec(x);
        ax.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Restriction to the given rows and columns, as a sparse matrix.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let mut trips = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let k = map[c];
                if k != usize::MAX {
                    trips.push((ri, k, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trips)
    }

    /// Restriction to the given rows and columns, as a dense matrix.
    pub fn dense_block(&self, rows: &[usize], cols: &[usize]) -> CMat {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let mut m = CMat::zeros(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let k = map[c];
                if k != usize::MAX {
                    m[(ri, k)] += v;
                }
            }
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, C64>> {
        let mut trips = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                trips.push(Triplet::new(i, c, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips).map_err(|e| {
            Error::Singular {
                context: "sparse assembly".into(),
                detail: format!("{e:?}"),
            }
        })
    }
}

/// Sparse LU factorization of a square [`CsrMatrix`].
pub struct SparseLu {
    n: usize,
    lu: Option<faer::sparse::linalg::solvers::Lu<usize, C64>>,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix, context: &str) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Singular {
                context: context.into(),
                detail: "matrix is not square".into(),
            });
        }
        if a.nrows == 0 {
            return Ok(SparseLu { n: 0, lu: None });
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| Error::Singular {
            context: context.into(),
            detail: format!("{e:?}"),
        })?;
        Ok(SparseLu {
            n: a.nrows,
            lu: Some(lu),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut CMat) {
        if let Some(lu) = &self.lu {
            lu.solve_in_place(rhs.as_mut());
        }
    }

    pub fn solve_vec(&self, rhs: &[C64]) -> Vec<C64> {
        let mut m = CMat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_in_place(&mut m);
        (0..rhs.len()).map(|i| m[(i, 0)]).collect()
    }
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Maximum absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_finite(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].is_finite()))
}

pub fn scaled(a: &CMat, s: C64) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn identity(n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

/// Solves `A X = B` by dense LU, rejecting non-finite or inaccurate results.
pub fn solve_dense(a: &CMat, b: &CMat, context: &str) -> Result<CMat> {
    if a.nrows() == 0 {
        return Ok(CMat::zeros(0, b.ncols()));
    }
    let lu = a.partial_piv_lu();
    let x = lu.solve(b);
    if !is_finite(&x) {
        return Err(Error::Singular {
            context: context.into(),
            detail: format!(
                "non-finite solution; smallest singular value {:e}",
                min_singular_value(a)
            ),
        });
    }
    Ok(x)
}

pub fn inverse(a: &CMat, context: &str) -> Result<CMat> {
    solve_dense(a, &identity(a.nrows()), context)
}

/// Relative residual `‖A X − B‖_F / ‖B‖_F` (absolute if B vanishes).
pub fn relative_residual(a: &CMat, x: &CMat, b: &CMat) -> f64 {
    let r = a * x - b;
    let nb = frobenius(b);
    if nb == 0.0 {
        frobenius(&r)
    } else {
        frobenius(&r) / nb
    }
}

pub fn min_singular_value(a: &CMat) -> f64 {
    match a.singular_values() {
        Ok(s) => s.iter().copied().fold(f64::INFINITY, f64::min),
        Err(_) => f64::NAN,
    }
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn eigen(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let evd = a.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let vals = (0..n).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

pub fn spectral_radius(a: &CMat) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

pub fn col_to_vec(a: &CMat, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn vec_to_col(v: &[C64]) -> CMat {
    CMat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn mat_vec(a: &CMat, x: &[C64]) -> Vec<C64> {
    col_to_vec(&(a * vec_to_col(x)), 0)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian inner product `Σ conj(y_i) x_i`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}
