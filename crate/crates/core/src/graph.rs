//! Weighted undirected graphs, their combinatorial Laplacians, optional
//! vertex importances, and sampling sets.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseSymMatrix, PSD_REL_TOL};

/// Graph with adjacency `A`, degrees `d`, Laplacian `L = D - A` and an
/// optional vertex-importance diagonal `q` (so that `L + diag(q)` is a DDGL).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphModel {
    adjacency: DenseSymMatrix,
    degrees: Vec<f64>,
    laplacian: DenseSymMatrix,
    vertex_importance: Option<Vec<f64>>,
}

/// Builds a [`GraphModel`], computing degrees and the Laplacian.
pub fn build_graph_model(
    adjacency: DenseSymMatrix,
    vertex_importance: Option<Vec<f64>>,
) -> Result<GraphModel> {
    let n = adjacency.order();
    for i in 0..n {
        let a_ii = adjacency.get(i, i);
        if a_ii != 0.0 {
            return Err(Error::NonzeroDiagonal { i, value: a_ii });
        }
        for j in (i + 1)..n {
            let w = adjacency.get(i, j);
            if w < 0.0 {
                return Err(Error::NegativeWeight { i, j, weight: w });
            }
        }
    }
    if let Some(q) = &vertex_importance {
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.len(),
            });
        }
        for (i, &value) in q.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveImportance { i, value });
            }
        }
    }
    let a = adjacency.as_matrix();
    let degrees: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let mut l = -a.clone();
    for (i, d) in degrees.iter().enumerate() {
        l[(i, i)] = *d;
    }
    Ok(GraphModel {
        laplacian: DenseSymMatrix::symmetrized(l),
        adjacency,
        degrees,
        vertex_importance,
    })
}

impl GraphModel {
    /// Graph from an edge list `(i, j, w)`; repeated pairs are summed.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        vertex_importance: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if !w.is_finite() {
                return Err(Error::NonFinite { i, j });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { i, j, weight: w });
            }
            if i == j {
                if w != 0.0 {
                    return Err(Error::NonzeroDiagonal { i, value: w });
                }
                continue;
            }
            a[(i, j)] += w;
            a[(j, i)] += w;
        }
        build_graph_model(DenseSymMatrix::symmetrized(a), vertex_importance)
    }

    pub fn n(&self) -> usize {
        self.adjacency.order()
    }

    pub fn adjacency(&self) -> &DenseSymMatrix {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn laplacian(&self) -> &DenseSymMatrix {
        &self.laplacian
    }

    pub fn vertex_importance(&self) -> Option<&[f64]> {
        self.vertex_importance.as_deref()
    }

    pub fn require_importance(&self) -> Result<&[f64]> {
        self.vertex_importance().ok_or(Error::MissingImportance)
    }

    /// `L + diag(q)`.
    pub fn ddgl(&self) -> Result<DenseSymMatrix> {
        let q = self.require_importance()?;
        self.laplacian.add_diagonal(q)
    }

    /// Graph operator used for reconstruction: `L + Q` when `use_importance`, else `L`.
    pub fn operator(&self, use_importance: bool) -> Result<DenseSymMatrix> {
        if use_importance {
            self.ddgl()
        } else {
            Ok(self.laplacian.clone())
        }
    }

    /// Edges `(i, j, w)` with `i < j` and `w > 0`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency.get(i, j);
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    /// Neighbour lists (positive weight).
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.adjacency.get(i, j) > 0.0).collect())
            .collect()
    }

    /// Unweighted hop distance from `source` to every vertex; `None` if unreachable.
    pub fn hop_distances(&self, source: usize) -> Vec<Option<usize>> {
        bfs(&self.neighbours(), source)
    }

    /// Re-checks every structural invariant numerically.
    pub fn validate(&self) -> Result<()> {
        let l = &self.laplacian;
        let n = self.n();
        let scale = l.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| l.get(i, j)).sum();
            if row_sum.abs() > 1e-9 * scale {
                return Err(Error::InvalidParameter(format!(
                    "laplacian row {i} sums to {row_sum:e}"
                )));
            }
            if l.get(i, i) < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "laplacian diagonal {i} is negative"
                )));
            }
            for j in 0..n {
                if i != j && l.get(i, j) > 0.0 {
                    return Err(Error::NegativeWeight {
                        i,
                        j,
                        weight: -l.get(i, j),
                    });
                }
            }
        }
        l.check_psd(PSD_REL_TOL)?;
        if self.vertex_importance.is_some() {
            for (i, &value) in self.require_importance()?.iter().enumerate() {
                if !(value > 0.0) {
                    return Err(Error::NonPositiveImportance { i, value });
                }
            }
            self.ddgl()?.cholesky()?;
        }
        Ok(())
    }
}

pub(crate) fn bfs(neighbours: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; neighbours.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &neighbours[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Ordered set of selected vertices together with the score each had when picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSet {
    pub method: String,
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl SamplingSet {
    pub fn new(
        method: impl Into<String>,
        indices: Vec<usize>,
        scores: Option<Vec<f64>>,
        n: usize,
    ) -> Result<Self> {
        let set = SamplingSet {
            method: method.into(),
            indices,
            scores,
        };
        set.validate(n)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Distinct indices, all `< n`, and one score per index when scores are present.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(self.indices.len());
        for &i in &self.indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if !seen.insert(i) {
                return Err(Error::DuplicateIndex(i));
            }
        }
        if let Some(s) = &self.scores {
            if s.len() != self.indices.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.indices.len(),
                    got: s.len(),
                });
            }
        }
        Ok(())
    }

    /// 0/1 membership mask of length `n`.
    pub fn mask(&self, n: usize) -> Result<Vec<bool>> {
        self.validate(n)?;
        let mut m = vec![false; n];
        for &i in &self.indices {
            m[i] = true;
        }
        Ok(m)
    }
}

/// Diagonal sampling matrix `H` with `H_ii = 1` iff `i` is selected.
pub fn sampling_operator(set: &SamplingSet, n: usize) -> Result<DenseSymMatrix> {
    let mask = set.mask(n)?;
    let diag: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Ok(DenseSymMatrix::from_diagonal(&diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(idx: &[usize]) -> SamplingSet {
        SamplingSet {
            method: "test".into(),
            indices: idx.to_vec(),
            scores: None,
        }
    }

    #[test]
    fn two_node_laplacian() {
        let g = GraphModel::from_edges(2, &[(0, 1, 1.0)], None).unwrap();
        assert_eq!(
            g.laplacian(),
            &DenseSymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
        );
    }

    #[test]
    fn edgeless_graph() {
        let g = build_graph_model(DenseSymMatrix::zeros(3), None).unwrap();
        assert_eq!(g.laplacian(), &DenseSymMatrix::zeros(3));
        assert_eq!(g.degrees(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn path_graph_matches_d_minus_a() {
        let a = DenseSymMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let g = build_graph_model(a.clone(), None).unwrap();
        let d = DenseSymMatrix::from_diagonal(&[1.0, 2.0, 1.0]);
        assert_eq!(g.laplacian(), &d.sub(&a).unwrap());
        g.validate().unwrap();
    }

    #[test]
    fn construction_errors() {
        let neg = DenseSymMatrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(
            build_graph_model(neg, None),
            Err(Error::NegativeWeight { .. })
        ));
        let diag = DenseSymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            build_graph_model(diag, None),
            Err(Error::NonzeroDiagonal { i: 0, .. })
        ));
        let ok = DenseSymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            build_graph_model(ok, Some(vec![1.0, 0.0])),
            Err(Error::NonPositiveImportance { i: 1, .. })
        ));
    }

    #[test]
    fn sampling_operator_examples() {
        let h = sampling_operator(&set(&[0]), 2).unwrap();
        assert_eq!(h, DenseSymMatrix::from_diagonal(&[1.0, 0.0]));
        let h = sampling_operator(&set(&[2, 0, 1]), 3).unwrap();
        assert_eq!(h, DenseSymMatrix::identity(3));
        let h = sampling_operator(&set(&[1, 3]), 4).unwrap();
        assert_eq!(h, DenseSymMatrix::from_diagonal(&[0.0, 1.0, 0.0, 1.0]));
        assert_eq!(
            sampling_operator(&set(&[4]), 4),
            Err(Error::IndexOutOfRange { index: 4, n: 4 })
        );
        assert_eq!(
            sampling_operator(&set(&[1, 1]), 4),
            Err(Error::DuplicateIndex(1))
        );
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0..n, 0..n, 0.0f64..5.0), 0..30),
                prop::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn quadratic_form_is_edge_sum((n, edges, f) in arb_graph()) {
            let edges: Vec<_> = edges.into_iter().filter(|(i, j, _)| i != j).collect();
            let g = GraphModel::from_edges(n, &edges, None).unwrap();
            let direct: f64 = g
                .edges()
                .iter()
                .map(|&(i, j, w)| w * (f[i] - f[j]).powi(2))
                .sum();
            let quad = g.laplacian().quadratic_form(&f);
            prop_assert!((quad - direct).abs() <= 1e-9 * direct.abs().max(1.0));
            prop_assert!(g.validate().is_ok());
        }

        #[test]
        fn sampling_operator_restricts((n, _e, f) in arb_graph(), pick in prop::collection::vec(any::<bool>(), 12)) {
            let idx: Vec<usize> = (0..n).filter(|&i| pick[i]).collect();
            let h = sampling_operator(&set(&idx), n).unwrap();
            prop_assert_eq!(h.trace() as usize, idx.len());
            let hf = h.as_matrix() * nalgebra::DVector::from_column_slice(&f);
            for i in 0..n {
                let expect = if idx.contains(&i) { f[i] } else { 0.0 };
                prop_assert_eq!(hf[i], expect);
            }
        }
    }
}
