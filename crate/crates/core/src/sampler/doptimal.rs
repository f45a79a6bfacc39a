//! Greedy maximisation of `logdet(H + γΩ)` over sampling sets.
//!
//! Adding vertex `j` to the set turns `G = H + γΩ` into `G + δ_j δ_jᵀ`, which
//! multiplies the determinant by `1 + [G⁻¹]_jj` (matrix-determinant lemma). The
//! greedy rule therefore picks the unselected vertex with the largest diagonal
//! entry of `G⁻¹`, and `G⁻¹` is carried forward by Sherman–Morrison.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{sampling_operator, SamplingSet};
use crate::matrix::DenseSymMatrix;

pub const METHOD_GREEDY: &str = "greedy";

/// `γ = 2μ - μ²`, the operator weight matching GLR reconstruction with weight `μ`.
pub fn gamma_from_mu(mu: f64) -> f64 {
    2.0 * mu - mu * mu
}

/// What to do when `γΩ` is singular (for example `Ω = L`, a CGL).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingularPolicy {
    /// Work with `γ(Ω + 11ᵀ/N)` instead.
    #[default]
    Shift,
    /// Fail with [`Error::SingularOperator`].
    Strict,
}

/// Running state of the greedy design: `g_inv = (H + G₀)⁻¹` where `G₀` is
/// `γΩ`, or its shifted version when `Ω` is singular.
#[derive(Debug, Clone)]
pub struct DOptState {
    base: DenseSymMatrix,
    g_inv: DMatrix<f64>,
    selected: SamplingSet,
    gamma: f64,
    shifted: bool,
}

impl DOptState {
    pub fn new(omega: &DenseSymMatrix, gamma: f64, policy: SingularPolicy) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        let n = omega.order();
        let scaled = omega.scale(gamma);
        let (base, g_inv, shifted) = match scaled.inverse_pd() {
            Ok(inv) => (scaled, inv, false),
            Err(_) if policy == SingularPolicy::Shift => {
                let base = omega.add_constant(1.0 / n as f64).scale(gamma);
                let inv = base.inverse_pd().map_err(|_| Error::SingularOperator)?;
                (base, inv, true)
            }
            Err(_) => return Err(Error::SingularOperator),
        };
        Ok(DOptState {
            base,
            g_inv: g_inv.into_matrix(),
            selected: SamplingSet {
                method: METHOD_GREEDY.into(),
                indices: Vec::new(),
                scores: Some(Vec::new()),
            },
            gamma,
            shifted,
        })
    }

    pub fn n(&self) -> usize {
        self.base.order()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True when the singular-operator shift was applied.
    pub fn is_shifted(&self) -> bool {
        self.shifted
    }

    pub fn selected(&self) -> &SamplingSet {
        &self.selected
    }

    pub fn into_selected(self) -> SamplingSet {
        self.selected
    }

    pub fn g_inv(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    /// `[G⁻¹]_jj`, the log-determinant gain is `log(1 + gain(j))`.
    pub fn gain(&self, j: usize) -> f64 {
        self.g_inv[(j, j)]
    }

    /// The matrix `H + G₀` that `g_inv` is supposed to invert.
    pub fn operator(&self) -> Result<DenseSymMatrix> {
        let h = sampling_operator(&self.selected, self.n())?;
        self.base.add(&h)
    }

    /// `‖g_inv (H + G₀) - I‖_F`.
    pub fn inverse_residual(&self) -> Result<f64> {
        let n = self.n();
        let prod = &self.g_inv * self.operator()?.as_matrix();
        Ok((prod - DMatrix::<f64>::identity(n, n)).norm())
    }

    /// Unselected vertex with the largest gain; lowest index wins ties.
    pub fn best_candidate(&self) -> Option<usize> {
        let mut taken = vec![false; self.n()];
        for &i in &self.selected.indices {
            taken[i] = true;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in (0..self.n()).filter(|&j| !taken[j]) {
            let g = self.gain(j);
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((j, g));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Adds `index` and applies the Sherman–Morrison correction in place.
    pub fn add(&mut self, index: usize) -> Result<()> {
        let n = self.n();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
        if self.selected.indices.contains(&index) {
            return Err(Error::AlreadySelected(index));
        }
        let gain = self.gain(index);
        let col: Vec<f64> = self.g_inv.column(index).iter().copied().collect();
        let denom = 1.0 + gain;
        let data = self.g_inv.as_mut_slice();
        for c in 0..n {
            let fc = col[c] / denom;
            for (entry, cr) in data[c * n..(c + 1) * n].iter_mut().zip(&col) {
                *entry -= fc * cr;
            }
        }
        self.selected.indices.push(index);
        if let Some(s) = self.selected.scores.as_mut() {
            s.push(gain);
        }
        Ok(())
    }
}

/// Functional form of [`DOptState::add`].
pub fn sm_update(mut state: DOptState, index: usize) -> Result<DOptState> {
    state.add(index)?;
    Ok(state)
}

/// Greedy D-optimal sampling set of size `k` for operator `omega`, shifting a
/// singular operator by `11ᵀ/N`.
pub fn greedy_doptimal(omega: &DenseSymMatrix, k: usize, gamma: f64) -> Result<SamplingSet> {
    greedy_doptimal_with(omega, k, gamma, SingularPolicy::Shift)
}

pub fn greedy_doptimal_with(
    omega: &DenseSymMatrix,
    k: usize,
    gamma: f64,
    policy: SingularPolicy,
) -> Result<SamplingSet> {
    let n = omega.order();
    if k == 0 || k > n {
        return Err(Error::BadBudget { k, n });
    }
    let mut state = DOptState::new(omega, gamma, policy)?;
    for _ in 0..k {
        let j = state
            .best_candidate()
            .expect("k <= n leaves a candidate at every step");
        state.add(j)?;
    }
    Ok(state.into_selected())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::doptimal_objective;

    #[test]
    fn sm_update_identity() {
        let st = DOptState::new(&DenseSymMatrix::identity(2), 1.0, SingularPolicy::Strict).unwrap();
        let st = sm_update(st, 0).unwrap();
        assert!((st.g_inv()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((st.g_inv()[(1, 1)] - 1.0).abs() < 1e-15);
        assert_eq!(st.g_inv()[(0, 1)], 0.0);
        assert!(matches!(sm_update(st, 0), Err(Error::AlreadySelected(0))));
    }

    #[test]
    fn picks_largest_inverse_diagonal() {
        let omega = DenseSymMatrix::from_diagonal(&[1.0, 2.0, 4.0]);
        let set = greedy_doptimal(&omega, 1, 1.0).unwrap();
        assert_eq!(set.indices, vec![0]);
        // Brute force over singletons.
        let best = (0..3)
            .map(|j| {
                let s = SamplingSet::new("x", vec![j], None, 3).unwrap();
                (j, doptimal_objective(&omega, &s, 1.0).unwrap())
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(best.0, 0);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let set = greedy_doptimal(&DenseSymMatrix::identity(4), 2, 1.0).unwrap();
        assert_eq!(set.indices, vec![0, 1]);
    }

    #[test]
    fn full_run_inverts_identity_plus_gamma_omega() {
        let omega = DenseSymMatrix::from_rows(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 3.0, -0.5],
            vec![0.0, -0.5, 1.0],
        ])
        .unwrap();
        let gamma = 0.3;
        let mut st = DOptState::new(&omega, gamma, SingularPolicy::Strict).unwrap();
        for j in [2, 0, 1] {
            st.add(j).unwrap();
        }
        let direct = omega
            .scale(gamma)
            .add(&DenseSymMatrix::identity(3))
            .unwrap()
            .inverse_pd()
            .unwrap();
        let diff = (st.g_inv() - direct.as_matrix()).norm() / direct.frobenius_norm();
        assert!(diff < 1e-12);
    }

    #[test]
    fn singular_operator_policies() {
        let l = DenseSymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert_eq!(
            greedy_doptimal_with(&l, 1, 1.0, SingularPolicy::Strict),
            Err(Error::SingularOperator)
        );
        let st = DOptState::new(&l, 1.0, SingularPolicy::Shift).unwrap();
        assert!(st.is_shifted());
        assert_eq!(greedy_doptimal(&l, 2, 1.0).unwrap().len(), 2);
    }

    #[test]
    fn bad_budget() {
        let omega = DenseSymMatrix::identity(3);
        assert_eq!(
            greedy_doptimal(&omega, 0, 1.0),
            Err(Error::BadBudget { k: 0, n: 3 })
        );
        assert_eq!(
            greedy_doptimal(&omega, 4, 1.0),
            Err(Error::BadBudget { k: 4, n: 3 })
        );
    }

    fn wishart(n: usize, seed: u64) -> DenseSymMatrix {
        use crate::synth::{rng_from_seed, NormalStream};
        let mut z = NormalStream::new(rng_from_seed(seed));
        let x = DMatrix::from_fn(n, n + 1, |_, _| z.next_normal());
        DenseSymMatrix::symmetrized(&x * x.transpose() / n as f64)
            .add_diagonal(&vec![0.05; n])
            .unwrap()
    }

    proptest::proptest! {
        #[test]
        fn greedy_is_prefix_stable(seed in 0u64..1000, n in 2usize..15) {
            let omega = wishart(n, seed);
            let full = greedy_doptimal(&omega, n, 0.1).unwrap();
            for m in 1..=n {
                let part = greedy_doptimal(&omega, m, 0.1).unwrap();
                proptest::prop_assert_eq!(&part.indices[..], &full.indices[..m]);
            }
        }

        #[test]
        fn each_pick_raises_logdet(seed in 0u64..1000, n in 2usize..15) {
            let omega = wishart(n, seed);
            let full = greedy_doptimal(&omega, n, 0.1).unwrap();
            let mut prev = doptimal_objective(&omega, &SamplingSet::new("t", vec![], None, n).unwrap(), 0.1).unwrap();
            for m in 1..=n {
                let set = SamplingSet::new("t", full.indices[..m].to_vec(), None, n).unwrap();
                let next = doptimal_objective(&omega, &set, 0.1).unwrap();
                proptest::prop_assert!(next < prev);
                prev = next;
            }
        }
    }
}
