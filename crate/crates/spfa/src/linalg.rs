//! Dense symmetric linear algebra shared by the other modules:
//! eigendecomposition, symmetric square roots, inversion, and sample
//! moment matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a matrix is treated as singular.
pub const SINGULARITY_EPS: f64 = 1e-10;

/// Condition number limit for [`sym_inverse`].
pub const CONDITION_LIMIT: f64 = 1e12;

/// A symmetric positive-(semi)definite matrix such as a covariance or
/// correlation matrix. Symmetry is enforced at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Wrap a square matrix, verifying finiteness and symmetry.
    ///
    /// Asymmetries up to 1e-12 (relative to the largest entry) are
    /// accepted and symmetrized away so that the stored entries satisfy
    /// `a[i][j] == a[j][i]` exactly.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut scale: f64 = 0.0;
        for (idx, v) in m.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    i: idx % m.nrows(),
                    j: idx / m.nrows(),
                });
            }
            scale = scale.max(v.abs());
        }
        let tol = 1e-12 * scale.max(1.0);
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                let diff = (m[(i, j)] - m[(j, i)]).abs();
                if diff > tol {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
            }
        }
        let sym = 0.5 * (&m + m.transpose());
        Ok(Self { m: sym })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(d)),
        }
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// True when every diagonal entry is 1 within 1e-12.
    pub fn is_correlation(&self) -> bool {
        self.m.diagonal().iter().all(|d| (d - 1.0).abs() <= 1e-12)
    }
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and column-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Decompose `a` as `V diag(values) V'`.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenPair> {
    const MAX_ITER: usize = 1000;
    let eig = nalgebra::SymmetricEigen::try_new(a.matrix().clone(), f64::EPSILON, MAX_ITER)
        .ok_or(Error::EigenFailed {
            iterations: MAX_ITER,
        })?;
    let n = a.order();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok(EigenPair { values, vectors })
}

/// Which symmetric power to take in [`sym_sqrt`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtKind {
    /// `a^{1/2}`: the symmetric square root.
    PlusHalf,
    /// `a^{-1/2}`: the inverse of the symmetric square root.
    MinusHalf,
}

/// Symmetric square root or inverse square root via eigendecomposition.
pub fn sym_sqrt(a: &SymMatrix, kind: SqrtKind) -> Result<SymMatrix> {
    let eig = sym_eigen(a)?;
    let max = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let threshold = SINGULARITY_EPS * max.max(f64::MIN_POSITIVE);
    let mut powered = eig.values.clone();
    for v in powered.iter_mut() {
        match kind {
            SqrtKind::PlusHalf => {
                // tiny negative round-off is clamped; genuinely negative
                // eigenvalues make the square root undefined
                if *v < -threshold {
                    return Err(Error::Singular {
                        eigenvalue: *v,
                        threshold,
                    });
                }
                *v = v.max(0.0).sqrt();
            }
            SqrtKind::MinusHalf => {
                if *v <= threshold {
                    return Err(Error::Singular {
                        eigenvalue: *v,
                        threshold,
                    });
                }
                *v = 1.0 / v.sqrt();
            }
        }
    }
    let m = &eig.vectors * DMatrix::from_diagonal(&powered) * eig.vectors.transpose();
    SymMatrix::from_matrix(m)
}

/// Inverse of a symmetric positive-definite matrix.
pub fn sym_inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eigen(a)?;
    let max = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min = eig.values[eig.values.len() - 1];
    let threshold = SINGULARITY_EPS * max.max(f64::MIN_POSITIVE);
    if min <= threshold {
        return Err(Error::Singular {
            eigenvalue: min,
            threshold,
        });
    }
    let cond = max / min;
    if cond > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    let inv_vals = eig.values.map(|v| 1.0 / v);
    let m = &eig.vectors * DMatrix::from_diagonal(&inv_vals) * eig.vectors.transpose();
    SymMatrix::from_matrix(m)
}

/// Covariance vs. correlation metric for [`sample_moment_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMode {
    Covariance,
    Correlation,
}

/// Unbiased sample covariance (divisor n-1) or correlation matrix of an
/// n x p data matrix. `labels`, when given, names columns in errors.
pub fn sample_moment_matrix(
    data: &DMatrix<f64>,
    mode: MomentMode,
    labels: Option<&[String]>,
) -> Result<SymMatrix> {
    let (n, p) = (data.nrows(), data.ncols());
    if n < p + 1 {
        return Err(Error::Input(format!(
            "need at least p+1 = {} rows to estimate a {p}x{p} moment matrix, got {n}",
            p + 1
        )));
    }
    let means: Vec<f64> = (0..p).map(|j| data.column(j).mean()).collect();
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (data[(r, i)] - means[i]) * (data[(r, j)] - means[j]);
            }
            let v = acc / (n as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    if mode == MomentMode::Correlation {
        for j in 0..p {
            if cov[(j, j)] <= 0.0 {
                let name = labels
                    .and_then(|l| l.get(j).cloned())
                    .unwrap_or_else(|| format!("{}", j + 1));
                return Err(Error::ConstantColumn { name });
            }
        }
        let sd: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] /= sd[i] * sd[j];
            }
            cov[(i, i)] = 1.0; // exact unit diagonal
        }
    }
    SymMatrix::from_matrix(cov)
}
