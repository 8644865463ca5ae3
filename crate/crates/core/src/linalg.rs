//! Dense real symmetric matrices and their eigendecomposition.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Implicit-QR sweeps allowed per dimension.
const QL_MAX_ITER: usize = 60;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.data.chunks(self.n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Largest entrywise asymmetry `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Conjugation `Pᵀ A P` with `P` given by its columns.
    pub fn project(&self, columns: &[Vec<f64>]) -> Self {
        let m = columns.len();
        let images: Vec<Vec<f64>> = columns.iter().map(|c| self.matvec(c)).collect();
        let mut out = Self::zeros(m);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = columns[i].iter().zip(&images[j]).map(|(a, b)| a * b).sum();
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Full eigendecomposition of a symmetric matrix (only the lower triangle is read).
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = a.dim();
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: vec![] });
    }
    let m = DMatrix::from_fn(n, n, |i, j| if j <= i { a[(i, j)] } else { a[(j, i)] });
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, QL_MAX_ITER * n)
        .ok_or(Error::EigenNoConvergence { index: 0, iterations: QL_MAX_ITER * n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = order.iter().map(|&j| eig.eigenvectors.column(j).iter().copied().collect()).collect();
    Ok(SymmetricEigen { values, vectors })
}
