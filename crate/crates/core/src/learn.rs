//! Maximum-likelihood graph learning from an empirical covariance `S`.
//!
//! Two models are supported:
//!
//! * CGL: minimise `-logdet(L + 11^T/N) + tr(L S)` over combinatorial
//!   Laplacians `L` (nonnegative edge weights).
//! * DDGL: minimise `-logdet(L + Q) + tr((L + Q) S)` jointly over a CGL `L`
//!   and a positive diagonal `Q` of vertex importances.
//!
//! Both are solved by exact block coordinate descent. Each coordinate update
//! is a rank-one change `K + Δ u u^T` of the precision `K`, whose one-dimensional
//! objective `-log(1 + Δ u^T K⁻¹ u) + Δ u^T S u` has the closed-form minimiser
//! `Δ = 1/(u^T S u) - 1/(u^T K⁻¹ u)`, clipped to keep weights nonnegative and
//! importances positive. `K⁻¹` is kept current by Sherman–Morrison updates and
//! refreshed from a Cholesky factorisation after every sweep.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph_model, GraphModel};
use crate::matrix::{logdet_from_cholesky, DenseSymMatrix, PSD_REL_TOL};

/// Lower bound on learned vertex importances.
pub const IMPORTANCE_FLOOR: f64 = 1e-6;

/// Slack allowed when checking that the per-sweep objective never increases.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub max_sweeps: usize,
    /// Converged once a sweep lowers the objective by less than this, relative
    /// to `max(|objective|, 1)`.
    pub obj_tol: f64,
    /// Edge weights below this are dropped from the returned graph.
    pub weight_floor: f64,
    /// ℓ1 penalty `ρ Σ_{i<j} w_ij` added to the objective.
    pub regularizer: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            max_sweeps: 200,
            obj_tol: 1e-7,
            weight_floor: 1e-6,
            regularizer: 0.0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        if !(self.obj_tol > 0.0) {
            return Err(Error::InvalidParameter("obj_tol must be positive".into()));
        }
        if !(self.weight_floor >= 0.0) || !(self.regularizer >= 0.0) {
            return Err(Error::InvalidParameter(
                "weight_floor and regularizer must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Objective history of a learning run.
///
/// `objective_per_sweep[0]` is the objective at the initial point; entry `s`
/// is the objective after sweep `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnTrace {
    pub objective_per_sweep: Vec<f64>,
    pub converged: bool,
    pub sweeps_used: usize,
}

impl LearnTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objective_per_sweep.last().expect("trace is never empty")
    }

    pub fn is_monotone(&self) -> bool {
        self.objective_per_sweep
            .windows(2)
            .all(|w| w[1] <= w[0] + MONOTONE_SLACK)
    }
}

/// `Σ_ij A_ij B_ij`, i.e. `tr(A B)` for symmetric `A`, `B`.
fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn check_pair(l: &DenseSymMatrix, s: &DenseSymMatrix) -> Result<()> {
    if l.order() != s.order() {
        return Err(Error::DimensionMismatch {
            expected: l.order(),
            got: s.order(),
        });
    }
    Ok(())
}

/// `-logdet(L + 11^T/N) + tr(L S)`.
pub fn cgl_objective(laplacian: &DenseSymMatrix, s: &DenseSymMatrix) -> Result<f64> {
    check_pair(laplacian, s)?;
    let n = laplacian.order() as f64;
    let logdet = laplacian
        .add_constant(1.0 / n)
        .logdet_pd()
        .map_err(|_| Error::SingularShiftedL)?;
    Ok(-logdet + trace_product(laplacian.as_matrix(), s.as_matrix()))
}

/// `-logdet(L + diag(q)) + tr((L + diag(q)) S)`.
pub fn ddgl_objective(laplacian: &DenseSymMatrix, q: &[f64], s: &DenseSymMatrix) -> Result<f64> {
    check_pair(laplacian, s)?;
    for (i, &value) in q.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveImportance { i, value });
        }
    }
    let k = laplacian.add_diagonal(q)?;
    let logdet = k.logdet_pd()?;
    Ok(-logdet + trace_product(k.as_matrix(), s.as_matrix()))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Model {
    Cgl,
    Ddgl,
}

struct Solver<'a> {
    model: Model,
    s: &'a DMatrix<f64>,
    n: usize,
    weights: DMatrix<f64>,
    q: Vec<f64>,
    inv: DMatrix<f64>,
    regularizer: f64,
    scratch: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(
        model: Model,
        s: &'a DenseSymMatrix,
        weights: DMatrix<f64>,
        q: Vec<f64>,
        regularizer: f64,
    ) -> Result<Self> {
        let n = s.order();
        let mut solver = Solver {
            model,
            s: s.as_matrix(),
            n,
            weights,
            q,
            inv: DMatrix::zeros(n, n),
            regularizer,
            scratch: vec![0.0; n],
        };
        solver.refresh()?;
        Ok(solver)
    }

    /// Current precision: `L + 11^T/N` for CGL, `L + Q` for DDGL.
    fn precision(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut k = -self.weights.clone();
        for i in 0..n {
            let degree: f64 = self.weights.row(i).sum();
            k[(i, i)] = degree;
        }
        match self.model {
            Model::Cgl => k.add_scalar_mut(1.0 / n as f64),
            Model::Ddgl => {
                for i in 0..n {
                    k[(i, i)] += self.q[i];
                }
            }
        }
        k
    }

    /// Recomputes the working inverse from scratch and returns the objective.
    fn refresh(&mut self) -> Result<f64> {
        let k = self.precision();
        let chol = nalgebra::Cholesky::new(k.clone()).ok_or(match self.model {
            Model::Cgl => Error::SingularShiftedL,
            Model::Ddgl => Error::NotPD,
        })?;
        let logdet = logdet_from_cholesky(&chol);
        let mut trace = trace_product(&k, self.s);
        if self.model == Model::Cgl {
            // tr(11^T S)/N is constant and not part of tr(L S).
            trace -= self.s.sum() / self.n as f64;
        }
        let mut penalty = 0.0;
        if self.regularizer > 0.0 {
            penalty = self.regularizer * self.weights.sum() / 2.0;
        }
        let inv = chol.inverse();
        self.inv = DenseSymMatrix::symmetrized(inv).into_matrix();
        Ok(-logdet + trace + penalty)
    }

    /// `inv -= factor * v v^T` with `v` held in `self.scratch`.
    fn rank_one_downdate(&mut self, factor: f64) {
        let n = self.n;
        let v = &self.scratch;
        let data = self.inv.as_mut_slice();
        for col in 0..n {
            let fc = factor * v[col];
            if fc == 0.0 {
                continue;
            }
            let column = &mut data[col * n..(col + 1) * n];
            for (entry, vr) in column.iter_mut().zip(v.iter()) {
                *entry -= fc * vr;
            }
        }
    }

    fn update_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let s = self.s;
        let curvature = s[(i, i)] + s[(j, j)] - 2.0 * s[(i, j)] + self.regularizer;
        let scale = s[(i, i)].abs().max(s[(j, j)].abs()).max(f64::MIN_POSITIVE);
        let w = self.weights[(i, j)];
        if curvature <= 1e-14 * scale {
            // The objective decreases without bound along this edge.
            return Err(Error::DegenerateCovariance { i, j });
        }
        let inv = &self.inv;
        let resistance = inv[(i, i)] + inv[(j, j)] - 2.0 * inv[(i, j)];
        if !(resistance > 0.0) {
            return Err(Error::NotPD);
        }
        let step = (1.0 / curvature - 1.0 / resistance).max(-w);
        if step == 0.0 {
            return Ok(());
        }
        let new_w = if step == -w { 0.0 } else { w + step };
        self.weights[(i, j)] = new_w;
        self.weights[(j, i)] = new_w;
        for r in 0..self.n {
            self.scratch[r] = self.inv[(r, i)] - self.inv[(r, j)];
        }
        self.rank_one_downdate(step / (1.0 + step * resistance));
        Ok(())
    }

    fn update_importance(&mut self, i: usize) -> Result<()> {
        let s_ii = self.s[(i, i)];
        if !(s_ii > 0.0) {
            return Err(Error::NotPD);
        }
        let c_ii = self.inv[(i, i)];
        let target = (self.q[i] + 1.0 / s_ii - 1.0 / c_ii).max(IMPORTANCE_FLOOR);
        let step = target - self.q[i];
        if step == 0.0 {
            return Ok(());
        }
        self.q[i] = target;
        for r in 0..self.n {
            self.scratch[r] = self.inv[(r, i)];
        }
        self.rank_one_downdate(step / (1.0 + step * c_ii));
        Ok(())
    }

    fn sweep(&mut self) -> Result<()> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                self.update_edge(i, j)?;
            }
        }
        if self.model == Model::Ddgl {
            for i in 0..self.n {
                self.update_importance(i)?;
            }
        }
        Ok(())
    }

    fn run(&mut self, cfg: &LearnConfig) -> Result<LearnTrace> {
        let mut objective = self.refresh()?;
        let mut history = vec![objective];
        let mut converged = false;
        for sweep in 1..=cfg.max_sweeps {
            let saved_weights = self.weights.clone();
            let saved_q = self.q.clone();
            self.sweep()?;
            let next = self.refresh()?;
            if next > objective {
                if sweep == 1 && next > objective + MONOTONE_SLACK {
                    return Err(Error::NoProgress {
                        before: objective,
                        after: next,
                    });
                }
                // Round-off level: keep the better iterate and stop.
                self.weights = saved_weights;
                self.q = saved_q;
                self.refresh()?;
                converged = true;
                break;
            }
            history.push(next);
            let decrease = (objective - next) / objective.abs().max(1.0);
            objective = next;
            if decrease < cfg.obj_tol {
                converged = true;
                break;
            }
        }
        Ok(LearnTrace {
            sweeps_used: history.len() - 1,
            objective_per_sweep: history,
            converged,
        })
    }

    fn into_model(self, weight_floor: f64) -> Result<GraphModel> {
        let mut w = self.weights;
        for v in w.iter_mut() {
            if *v < weight_floor {
                *v = 0.0;
            }
        }
        for i in 0..self.n {
            w[(i, i)] = 0.0;
        }
        let q = match self.model {
            Model::Cgl => None,
            Model::Ddgl => Some(self.q),
        };
        build_graph_model(DenseSymMatrix::symmetrized(w), q)
    }
}

/// Inverse of `m + shift·11^T`, adding growing diagonal jitter if needed.
fn regularised_inverse(m: &DenseSymMatrix, shift: f64) -> Result<DMatrix<f64>> {
    let n = m.order();
    let base = m.add_constant(shift);
    if let Ok(inv) = base.inverse_pd() {
        return Ok(inv.into_matrix());
    }
    let mut jitter = 1e-10 * (m.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    for _ in 0..6 {
        if let Ok(inv) = base.add_diagonal(&vec![jitter; n])?.inverse_pd() {
            return Ok(inv.into_matrix());
        }
        jitter *= 10.0;
    }
    Err(Error::NotPD)
}

/// Adjacency obtained by clamping the off-diagonal of a precision to `<= 0`.
fn clamped_adjacency(precision: &DMatrix<f64>) -> DMatrix<f64> {
    let n = precision.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-0.5 * (precision[(i, j)] + precision[(j, i)])).max(0.0)
        }
    })
}

fn validate_covariance(s: &DenseSymMatrix) -> Result<()> {
    if s.order() < 2 {
        return Err(Error::BadSize(s.order()));
    }
    s.check_psd(PSD_REL_TOL)
}

/// Learns a combinatorial graph Laplacian from the covariance `s`.
pub fn learn_cgl(s: &DenseSymMatrix, cfg: &LearnConfig) -> Result<(GraphModel, LearnTrace)> {
    cfg.validate()?;
    validate_covariance(s)?;
    let n = s.order();
    let precision = regularised_inverse(s, 1.0 / n as f64)?;
    let mut weights = clamped_adjacency(&precision);
    let shifted = {
        let g = build_graph_model(DenseSymMatrix::symmetrized(weights.clone()), None)?;
        g.laplacian().add_constant(1.0 / n as f64)
    };
    if shifted.cholesky().is_err() {
        // Disconnected start: add the complete graph that is optimal for S = (tr S / N) I.
        let mean_var = (s.trace() / n as f64).max(f64::MIN_POSITIVE);
        let w0 = 1.0 / (n as f64 * mean_var);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    weights[(i, j)] += w0;
                }
            }
        }
    }
    let mut solver = Solver::new(Model::Cgl, s, weights, Vec::new(), cfg.regularizer)?;
    let trace = solver.run(cfg)?;
    Ok((solver.into_model(cfg.weight_floor)?, trace))
}

/// Learns a CGL starting from the edge weights of `initial`.
pub fn learn_cgl_from(
    s: &DenseSymMatrix,
    cfg: &LearnConfig,
    initial: &GraphModel,
) -> Result<(GraphModel, LearnTrace)> {
    cfg.validate()?;
    validate_covariance(s)?;
    check_pair(initial.adjacency(), s)?;
    let weights = initial.adjacency().as_matrix().clone();
    let mut solver = Solver::new(Model::Cgl, s, weights, Vec::new(), cfg.regularizer)?;
    let trace = solver.run(cfg)?;
    Ok((solver.into_model(cfg.weight_floor)?, trace))
}

/// Jointly learns a CGL and vertex importances (a DDGL `L + Q`) from `s`,
/// which must be positive definite.
pub fn learn_ddgl(s: &DenseSymMatrix, cfg: &LearnConfig) -> Result<(GraphModel, LearnTrace)> {
    cfg.validate()?;
    validate_covariance(s)?;
    s.cholesky()?;
    let n = s.order();
    let precision = regularised_inverse(s, 0.0)?;
    let weights = clamped_adjacency(&precision);
    let q = (0..n)
        .map(|i| (precision[(i, i)] - weights.row(i).sum()).max(IMPORTANCE_FLOOR))
        .collect();
    let mut solver = Solver::new(Model::Ddgl, s, weights, q, cfg.regularizer)?;
    let trace = solver.run(cfg)?;
    Ok((solver.into_model(cfg.weight_floor)?, trace))
}

/// Learns a DDGL starting from `initial`, which must carry vertex importances.
pub fn learn_ddgl_from(
    s: &DenseSymMatrix,
    cfg: &LearnConfig,
    initial: &GraphModel,
) -> Result<(GraphModel, LearnTrace)> {
    cfg.validate()?;
    validate_covariance(s)?;
    s.cholesky()?;
    check_pair(initial.adjacency(), s)?;
    let q = initial.require_importance()?.to_vec();
    let weights = initial.adjacency().as_matrix().clone();
    let mut solver = Solver::new(Model::Ddgl, s, weights, q, cfg.regularizer)?;
    let trace = solver.run(cfg)?;
    Ok((solver.into_model(cfg.weight_floor)?, trace))
}
