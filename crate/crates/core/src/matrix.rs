//! Dense symmetric matrices and the handful of factorizations the rest of the
//! crate needs: Cholesky solves and log-determinants, inverses of PD matrices,
//! and the eigen-based pseudo-inverse of PSD matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the smallest eigenvalue when deciding PSD-ness.
pub const PSD_REL_TOL: f64 = 1e-8;

/// Relative asymmetry accepted (and then removed) at construction.
const SYMMETRY_REL_TOL: f64 = 1e-10;

/// Square, exactly symmetric real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseSymMatrix(DMatrix<f64>);

impl DenseSymMatrix {
    /// Validates `m` and returns it with `a[i][j] == a[j][i]` exactly.
    ///
    /// Asymmetry up to a relative 1e-10 of the largest entry is averaged away;
    /// anything larger is rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut scale = 0.0f64;
        for j in 0..cols {
            for i in 0..rows {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                scale = scale.max(v.abs());
            }
        }
        let tol = SYMMETRY_REL_TOL * scale.max(1.0);
        for i in 0..rows {
            for j in (i + 1)..rows {
                let diff = (m[(i, j)] - m[(j, i)]).abs();
                if diff > tol {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Averages `m` with its transpose. The caller guarantees `m` is square.
    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        debug_assert_eq!(n, m.ncols());
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        DenseSymMatrix(m)
    }

    pub fn zeros(n: usize) -> Self {
        DenseSymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        DenseSymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        DenseSymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        DenseSymMatrix(&self.0 * c)
    }

    pub fn add(&self, other: &DenseSymMatrix) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(DenseSymMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &DenseSymMatrix) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(DenseSymMatrix(&self.0 - &other.0))
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                got: d.len(),
            });
        }
        let mut m = self.0.clone();
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] += v;
        }
        Ok(DenseSymMatrix(m))
    }

    /// `self + c * 11^T`.
    pub fn add_constant(&self, c: f64) -> Self {
        DenseSymMatrix(self.0.add_scalar(c))
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&(&self.0 * &v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Frobenius distance relative to the norm of `reference`.
    pub fn relative_distance(&self, reference: &DenseSymMatrix) -> f64 {
        let denom = reference.frobenius_norm();
        let diff = (&self.0 - &reference.0).norm();
        if denom == 0.0 {
            diff
        } else {
            diff / denom
        }
    }

    fn check_same_order(&self, other: &DenseSymMatrix) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                got: other.order(),
            });
        }
        Ok(())
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, Dyn> {
        SymmetricEigen::new(self.0.clone())
    }

    /// (smallest, largest) eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = self.0.symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// Errors with `NotPSD` unless the smallest eigenvalue is at least
    /// `-rel_tol * max(|largest|, |smallest|)`.
    pub fn check_psd(&self, rel_tol: f64) -> Result<()> {
        let (min_eig, max_eig) = self.eigen_range();
        let scale = max_eig.abs().max(min_eig.abs());
        if min_eig < -rel_tol * scale {
            return Err(Error::NotPSD { min_eig, max_eig });
        }
        Ok(())
    }

    /// Cholesky factor; `NotPD` also when a pivot is round-off relative to the diagonal.
    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        let chol = Cholesky::new(self.0.clone()).ok_or(Error::NotPD)?;
        let scale = self.0.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = 16.0 * f64::EPSILON * self.order() as f64 * scale;
        let l = chol.l_dirty();
        if (0..l.nrows()).any(|i| l[(i, i)] * l[(i, i)] <= floor) {
            return Err(Error::NotPD);
        }
        Ok(chol)
    }

    /// log det via Cholesky; `NotPD` if the factorization fails.
    pub fn logdet_pd(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(logdet_from_cholesky(&chol))
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse_pd(&self) -> Result<DenseSymMatrix> {
        let chol = self.cholesky()?;
        Ok(DenseSymMatrix::symmetrized(chol.inverse()))
    }

    /// Solves `M x = b` for positive definite `M`.
    pub fn solve_pd(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                got: b.len(),
            });
        }
        let chol = self.cholesky()?;
        Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseSymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DenseSymMatrix::from_rows(&rows)
    }
}

impl From<DenseSymMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseSymMatrix) -> Self {
        let n = m.order();
        (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect()
    }
}

pub(crate) fn logdet_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Moore–Penrose pseudo-inverse of a PSD matrix via its eigendecomposition.
///
/// Eigenvalues below `rank_tol * λ_max` are treated as zero.
pub fn pinv_psd(m: &DenseSymMatrix, rank_tol: f64) -> Result<DenseSymMatrix> {
    let eig = m.eigen();
    let max_eig = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_REL_TOL * max_eig.max(min_eig.abs()) {
        return Err(Error::NotPSD { min_eig, max_eig });
    }
    let cutoff = rank_tol * max_eig;
    let n = m.order();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cutoff || lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.transpose()) / lambda;
    }
    Ok(DenseSymMatrix::symmetrized(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_psd(n: usize, rank: usize, seed: u64) -> DenseSymMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        DenseSymMatrix::symmetrized(&a * a.transpose())
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(matches!(
            DenseSymMatrix::new(m),
            Err(Error::NotSymmetric { .. })
        ));
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(
            DenseSymMatrix::new(m),
            Err(Error::NotSquare { .. })
        ));
        assert_eq!(
            DenseSymMatrix::new(DMatrix::zeros(0, 0)),
            Err(Error::EmptyMatrix)
        );
    }

    #[test]
    fn tiny_asymmetry_is_averaged_away() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-14, 1.0]);
        let s = DenseSymMatrix::new(m).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
    }

    #[test]
    fn pinv_identity_and_diagonal() {
        let id = DenseSymMatrix::identity(4);
        let p = pinv_psd(&id, 1e-12).unwrap();
        assert!(p.relative_distance(&id) < 1e-14);

        let d = DenseSymMatrix::from_diagonal(&[2.0, 0.0]);
        let p = pinv_psd(&d, 1e-12).unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(p.get(1, 1), 0.0);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn pinv_two_node_laplacian_penrose() {
        let l = DenseSymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let p = pinv_psd(&l, 1e-12).unwrap();
        let lm = l.as_matrix();
        let back = lm * p.as_matrix() * lm;
        assert!((back - lm).norm() < 1e-10);
        // L† = L / 4 for this graph.
        assert!((p.get(0, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pinv_rejects_indefinite() {
        let m = DenseSymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(pinv_psd(&m, 1e-12), Err(Error::NotPSD { .. })));
    }

    #[test]
    fn pinv_penrose_conditions_random() {
        for seed in 0..20u64 {
            let n = 2 + (seed as usize * 7) % 49;
            let rank = 1 + (seed as usize * 3) % n;
            let m = random_psd(n, rank, seed);
            let p = pinv_psd(&m, 1e-10).unwrap();
            let a = m.as_matrix();
            let x = p.as_matrix();
            let scale_a = a.norm().max(1.0);
            let scale_x = x.norm().max(1.0);
            assert!((a * x * a - a).norm() <= 1e-8 * scale_a * scale_a * scale_x);
            assert!((x * a * x - x).norm() <= 1e-8 * scale_x * scale_x * scale_a);
            let ax = a * x;
            let xa = x * a;
            assert!((&ax - ax.transpose()).norm() <= 1e-8 * scale_a * scale_x);
            assert!((&xa - xa.transpose()).norm() <= 1e-8 * scale_a * scale_x);
        }
    }

    #[test]
    fn logdet_and_solve() {
        let m = DenseSymMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        assert!((m.logdet_pd().unwrap() - 3.0f64.ln()).abs() < 1e-14);
        let x = m.solve_pd(&[1.0, 0.0]).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-14);
        let z = DenseSymMatrix::zeros(2);
        assert_eq!(z.logdet_pd(), Err(Error::NotPD));
    }
}
