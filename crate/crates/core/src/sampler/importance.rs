//! Sampling from learned vertex importances: plain top-k (VIS) and the greedy
//! variant with p-hop repulsion between picks (VISR).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{GraphModel, SamplingSet};
use crate::matrix::DenseSymMatrix;

pub const METHOD_VIS: &str = "vis";
pub const METHOD_VISR: &str = "visr";

fn check_budget(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::BadBudget { k, n });
    }
    Ok(())
}

/// The `k` vertices with the largest importance, in descending order.
pub fn vis_select(model: &GraphModel, k: usize) -> Result<SamplingSet> {
    let q = model.require_importance()?;
    check_budget(k, q.len())?;
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    order.truncate(k);
    let scores = order.iter().map(|&i| q[i]).collect();
    Ok(SamplingSet {
        method: METHOD_VIS.into(),
        indices: order,
        scores: Some(scores),
    })
}

/// Handling of vertices without edges when forming `D⁻¹A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolatedPolicy {
    /// Use a zero row: the vertex neither repels nor is repelled.
    #[default]
    ZeroRow,
    Strict,
}

/// Columns of `Z = Σ_{l=1..p} (D⁻¹A)^l` and their Gram matrix.
#[derive(Debug, Clone)]
pub struct RepulsionFilter {
    p: usize,
    z: DMatrix<f64>,
    gram: DenseSymMatrix,
}

impl RepulsionFilter {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    /// The filtered delta `z_i = Z δ_i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.z.column(i).iter().copied().collect()
    }

    pub fn filter_matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// `⟨z_i, z_j⟩` for all pairs.
    pub fn gram(&self) -> &DenseSymMatrix {
        &self.gram
    }
}

pub fn build_repulsion_filter(model: &GraphModel, p: usize) -> Result<RepulsionFilter> {
    build_repulsion_filter_with(model, p, IsolatedPolicy::ZeroRow)
}

pub fn build_repulsion_filter_with(
    model: &GraphModel,
    p: usize,
    policy: IsolatedPolicy,
) -> Result<RepulsionFilter> {
    if p == 0 {
        return Err(Error::InvalidParameter("hop count p must be >= 1".into()));
    }
    let n = model.n();
    let a = model.adjacency().as_matrix();
    let degrees = model.degrees();
    let mut walk = DMatrix::zeros(n, n);
    for i in 0..n {
        if degrees[i] > 0.0 {
            for j in 0..n {
                walk[(i, j)] = a[(i, j)] / degrees[i];
            }
        } else if policy == IsolatedPolicy::Strict {
            return Err(Error::IsolatedVertex(i));
        }
    }
    let mut power = walk.clone();
    let mut z = walk.clone();
    for _ in 1..p {
        power = &power * &walk;
        z += &power;
    }
    let gram = DenseSymMatrix::symmetrized(z.transpose() * &z);
    Ok(RepulsionFilter { p, z, gram })
}

/// `p = ⌈1 / (2α)⌉` with sampling rate `α = k / n`.
pub fn auto_hops(k: usize, n: usize) -> usize {
    assert!(k > 0, "budget must be positive");
    n.div_ceil(2 * k).max(1)
}

/// VISR with `p` taken from [`auto_hops`] when not given.
pub fn visr_select(model: &GraphModel, k: usize, p: Option<usize>) -> Result<SamplingSet> {
    model.require_importance()?;
    check_budget(k, model.n())?;
    let p = p.unwrap_or_else(|| auto_hops(k, model.n()));
    let filter = build_repulsion_filter(model, p)?;
    visr_select_with_filter(model, k, &filter)
}

/// VISR with a precomputed filter: repeatedly adds the unselected `x`
/// maximising `q_x - Σ_{y∈S} ⟨z_x, z_y⟩`, lowest index on ties.
pub fn visr_select_with_filter(
    model: &GraphModel,
    k: usize,
    filter: &RepulsionFilter,
) -> Result<SamplingSet> {
    let q = model.require_importance()?;
    let n = q.len();
    check_budget(k, n)?;
    if filter.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: filter.n(),
        });
    }
    let gram = filter.gram().as_matrix();
    let mut penalty = vec![0.0; n];
    let mut taken = vec![false; n];
    let mut indices = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for x in 0..n {
            if taken[x] {
                continue;
            }
            let score = q[x] - penalty[x];
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((x, score));
            }
        }
        let (pick, score) = best.expect("k <= n leaves a candidate at every step");
        taken[pick] = true;
        indices.push(pick);
        scores.push(score);
        for (x, pen) in penalty.iter_mut().enumerate() {
            *pen += gram[(x, pick)];
        }
    }
    Ok(SamplingSet {
        method: METHOD_VISR.into(),
        indices,
        scores: Some(scores),
    })
}
