//! Graph-Laplacian-regularised (GLR) reconstruction
//! `f̂ = argmin ‖I_Sᵀ f - y_S‖² + μ fᵀ Ω f = (H + μΩ)⁻¹ I_S y_S`,
//! its error covariance under unit-variance noise, and the `(H + γΩ)⁻¹`
//! approximation used as the D-optimal design criterion.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::graph::{sampling_operator, SamplingSet};
use crate::matrix::{logdet_from_cholesky, DenseSymMatrix};
use crate::sampler::gamma_from_mu;

pub const DEFAULT_MU: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionProblem {
    pub omega: DenseSymMatrix,
    pub set: SamplingSet,
    pub mu: f64,
    pub observations: Vec<f64>,
}

impl ReconstructionProblem {
    pub fn new(
        omega: DenseSymMatrix,
        set: SamplingSet,
        mu: f64,
        observations: Vec<f64>,
    ) -> Result<Self> {
        check_mu(mu)?;
        set.validate(omega.order())?;
        if set.is_empty() {
            return Err(Error::EmptySamplingSet);
        }
        if observations.len() != set.len() {
            return Err(Error::DimensionMismatch {
                expected: set.len(),
                got: observations.len(),
            });
        }
        Ok(ReconstructionProblem {
            omega,
            set,
            mu,
            observations,
        })
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {mu}"
        )));
    }
    Ok(())
}

/// `H + c Ω`.
fn sampled_operator(omega: &DenseSymMatrix, set: &SamplingSet, c: f64) -> Result<DenseSymMatrix> {
    let h = sampling_operator(set, omega.order())?;
    h.add(&omega.scale(c))
}

/// Factorisation of `B = H + μΩ`, reusable across many observation vectors.
pub struct GlrSolver {
    b: DenseSymMatrix,
    chol: Cholesky<f64, Dyn>,
    indices: Vec<usize>,
}

impl GlrSolver {
    pub fn new(omega: &DenseSymMatrix, set: &SamplingSet, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        if set.is_empty() {
            return Err(Error::EmptySamplingSet);
        }
        let b = sampled_operator(omega, set, mu)?;
        let chol = b.cholesky().map_err(|_| {
            Error::SolveFailure("H + mu*Omega is not positive definite".into())
        })?;
        Ok(GlrSolver {
            b,
            chol,
            indices: set.indices.clone(),
        })
    }

    /// Reconstructs from the observed values `y_S` (ordered like the set).
    pub fn solve(&self, observations: &[f64]) -> Result<Vec<f64>> {
        if observations.len() != self.indices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.indices.len(),
                got: observations.len(),
            });
        }
        let n = self.b.order();
        let mut rhs = DVector::zeros(n);
        for (&i, &y) in self.indices.iter().zip(observations) {
            rhs[i] = y;
        }
        let mut x = self.chol.solve(&rhs);
        let bound = 1e-8 * rhs.norm();
        let mut residual = &rhs - self.b.as_matrix() * &x;
        if residual.norm() > bound {
            // One step of iterative refinement.
            x += self.chol.solve(&residual);
            residual = &rhs - self.b.as_matrix() * &x;
            if residual.norm() > bound {
                return Err(Error::SolveFailure(format!(
                    "residual {:e} exceeds {:e}",
                    residual.norm(),
                    bound
                )));
            }
        }
        Ok(x.as_slice().to_vec())
    }

    /// Picks the set's entries out of a full-length signal and reconstructs.
    pub fn solve_from_full(&self, signal: &[f64]) -> Result<Vec<f64>> {
        if signal.len() != self.b.order() {
            return Err(Error::DimensionMismatch {
                expected: self.b.order(),
                got: signal.len(),
            });
        }
        let y: Vec<f64> = self.indices.iter().map(|&i| signal[i]).collect();
        self.solve(&y)
    }
}

pub fn glr_reconstruct(problem: &ReconstructionProblem) -> Result<Vec<f64>> {
    GlrSolver::new(&problem.omega, &problem.set, problem.mu)?.solve(&problem.observations)
}

fn inverse_of(m: &DenseSymMatrix) -> Result<DMatrix<f64>> {
    m.inverse_pd()
        .map(DenseSymMatrix::into_matrix)
        .map_err(|_| Error::SolveFailure("matrix is not positive definite".into()))
}

/// `B⁻¹ - (μ - μ²) B⁻¹ Ω B⁻¹` with `B = H + μΩ`.
pub fn error_covariance_exact(
    omega: &DenseSymMatrix,
    set: &SamplingSet,
    mu: f64,
) -> Result<DenseSymMatrix> {
    check_mu(mu)?;
    let b_inv = inverse_of(&sampled_operator(omega, set, mu)?)?;
    let sandwich = &b_inv * omega.as_matrix() * &b_inv;
    Ok(DenseSymMatrix::symmetrized(b_inv - sandwich * (mu - mu * mu)))
}

/// `(H + γΩ)⁻¹` with `γ = 2μ - μ²`.
pub fn error_covariance_approx(
    omega: &DenseSymMatrix,
    set: &SamplingSet,
    mu: f64,
) -> Result<DenseSymMatrix> {
    check_mu(mu)?;
    let g = sampled_operator(omega, set, gamma_from_mu(mu))?;
    Ok(DenseSymMatrix::symmetrized(inverse_of(&g)?))
}

/// `-logdet(H + γΩ)`.
pub fn doptimal_objective(omega: &DenseSymMatrix, set: &SamplingSet, gamma: f64) -> Result<f64> {
    let g = sampled_operator(omega, set, gamma)?;
    let chol = g.cholesky()?;
    Ok(-logdet_from_cholesky(&chol))
}
