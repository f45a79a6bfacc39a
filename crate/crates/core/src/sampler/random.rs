use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SamplingSet;
use crate::synth::rng_from_seed;

pub const METHOD_RANDOM: &str = "random";
pub const METHOD_BERNOULLI: &str = "bernoulli";

/// Uniform random `k`-subset of `0..n`.
pub fn random_select_fixed(n: usize, k: usize, seed: u64) -> Result<SamplingSet> {
    if k == 0 || k > n {
        return Err(Error::BadBudget { k, n });
    }
    let mut rng = rng_from_seed(seed);
    let indices = rand::seq::index::sample(&mut rng, n, k).into_vec();
    Ok(SamplingSet {
        method: METHOD_RANDOM.into(),
        indices,
        scores: None,
    })
}

/// One Bernoulli(prob) draw per vertex; may be empty.
pub fn bernoulli_draw(n: usize, prob: f64, seed: u64) -> Result<Vec<usize>> {
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(Error::BadProbability(prob));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n).filter(|_| rng.random::<f64>() < prob).collect())
}

/// Independent inclusion with probability `prob`; an empty draw is repeated
/// with `seed + 1`, `seed + 2`, ... until nonempty.
pub fn random_select_bernoulli(n: usize, prob: f64, seed: u64) -> Result<SamplingSet> {
    if n == 0 {
        return Err(Error::BadSize(0));
    }
    let mut s = seed;
    loop {
        let indices = bernoulli_draw(n, prob, s)?;
        if !indices.is_empty() {
            return Ok(SamplingSet {
                method: METHOD_BERNOULLI.into(),
                indices,
                scores: None,
            });
        }
        s = s.wrapping_add(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_budget() {
        let mut all = random_select_fixed(7, 7, 3).unwrap().indices;
        all.sort();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert_eq!(
            random_select_fixed(10, 4, 9).unwrap(),
            random_select_fixed(10, 4, 9).unwrap()
        );
        assert_eq!(random_select_fixed(3, 0, 0), Err(Error::BadBudget { k: 0, n: 3 }));
        assert_eq!(random_select_fixed(3, 4, 0), Err(Error::BadBudget { k: 4, n: 3 }));
    }

    #[test]
    fn fixed_budget_is_uniform() {
        let hits = (0..10_000u64)
            .filter(|&s| random_select_fixed(2, 1, s).unwrap().indices[0] == 0)
            .count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn bernoulli_examples() {
        assert_eq!(
            random_select_bernoulli(5, 1.0, 0).unwrap().indices,
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            random_select_bernoulli(100, 0.01, 4).unwrap(),
            random_select_bernoulli(100, 0.01, 4).unwrap()
        );
        assert!(!random_select_bernoulli(100, 0.01, 4).unwrap().is_empty());
        assert_eq!(bernoulli_draw(5, 0.0, 0), Err(Error::BadProbability(0.0)));
        assert_eq!(bernoulli_draw(5, 1.5, 0), Err(Error::BadProbability(1.5)));
    }

    #[test]
    fn bernoulli_mean_size() {
        let trials = 10_000u64;
        let total: usize = (0..trials)
            .map(|s| bernoulli_draw(100, 0.01, s).unwrap().len())
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean {mean}");
    }
}
