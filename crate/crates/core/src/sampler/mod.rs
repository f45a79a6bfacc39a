//! Sampling-set selectors.

mod doptimal;
mod importance;
mod random;

pub use doptimal::{
    gamma_from_mu, greedy_doptimal, greedy_doptimal_with, sm_update, DOptState, SingularPolicy,
    METHOD_GREEDY,
};
pub use importance::{
    auto_hops, build_repulsion_filter, build_repulsion_filter_with, vis_select, visr_select,
    visr_select_with_filter, IsolatedPolicy, RepulsionFilter, METHOD_VIS, METHOD_VISR,
};
pub use random::{
    bernoulli_draw, random_select_bernoulli, random_select_fixed, METHOD_BERNOULLI, METHOD_RANDOM,
};
