//! Synthetic experiment inputs: random node geometry on the unit square, an
//! exponential-kernel Gaussian-process covariance over it, Gaussian signal
//! draws with additive white noise, and the empirical covariance of a batch.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded with a caller-supplied
//! `u64`; normal variates use the Box–Muller transform so the streams do not
//! depend on any distribution crate's sampling algorithm.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseSymMatrix, PSD_REL_TOL};

pub const DEFAULT_RANGE: f64 = 0.02;
pub const DEFAULT_VARIANCE: f64 = 10.0;

const JITTER_BASE: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream id (SplitMix64 finaliser) so that
/// independent streams can be derived from one user seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal variates by Box–Muller, caching the second value of each pair.
pub struct NormalStream<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> NormalStream<R> {
    pub fn new(rng: R) -> Self {
        NormalStream { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub points: Vec<[f64; 2]>,
    pub seed: u64,
}

impl NodeLayout {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let [xi, yi] = self.points[i];
        let [xj, yj] = self.points[j];
        (xi - xj).hypot(yi - yj)
    }
}

/// `n` i.i.d. uniform points in `[0, 1] x [0, 1]`.
pub fn generate_layout(n: usize, seed: u64) -> Result<NodeLayout> {
    if n < 2 {
        return Err(Error::BadSize(n));
    }
    let mut rng = rng_from_seed(seed);
    let points = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    Ok(NodeLayout { points, seed })
}

/// Exponential-kernel covariance `variance * exp(-d_ij / r)`.
pub fn gp_covariance(layout: &NodeLayout, r: f64, variance: f64) -> Result<DenseSymMatrix> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DegenerateRange(r));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "variance must be positive, got {variance}"
        )));
    }
    let n = layout.n();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            variance
        } else {
            variance * (-layout.distance(i, j) / r).exp()
        }
    });
    Ok(DenseSymMatrix::symmetrized(m))
}

/// K realisations of an N-dimensional signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalBatch {
    pub signals: Vec<Vec<f64>>,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl SignalBatch {
    pub fn new(signals: Vec<Vec<f64>>, seed: u64, noise_sigma: f64) -> Result<Self> {
        let first = signals.first().ok_or(Error::EmptyBatch)?.len();
        if first == 0 {
            return Err(Error::ShapeMismatch("signals have length 0".into()));
        }
        for s in &signals {
            if s.len() != first {
                return Err(Error::DimensionMismatch {
                    expected: first,
                    got: s.len(),
                });
            }
        }
        Ok(SignalBatch {
            signals,
            seed,
            noise_sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Signal dimension N.
    pub fn dim(&self) -> usize {
        self.signals.first().map_or(0, Vec::len)
    }
}

/// Lower-triangular square-root factor `F` with `F F^T ≈ cov`.
///
/// Tries Cholesky first, then adds growing diagonal jitter; falls back to the
/// symmetric eigen square root when the matrix is PSD but too singular.
pub fn covariance_factor(cov: &DenseSymMatrix) -> Result<DMatrix<f64>> {
    let n = cov.order();
    if cov.max_abs() == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    cov.check_psd(PSD_REL_TOL)?;
    if let Ok(chol) = cov.cholesky() {
        return Ok(chol.l());
    }
    let base = JITTER_BASE * (cov.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = base;
    for _ in 0..JITTER_RETRIES {
        let shifted = cov.add_diagonal(&vec![jitter; n])?;
        if let Ok(chol) = shifted.cholesky() {
            return Ok(chol.l());
        }
        jitter *= 10.0;
    }
    let eig = cov.eigen();
    let mut root = eig.eigenvectors.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        root.column_mut(k).scale_mut(s);
    }
    Ok(root)
}

/// `count` i.i.d. draws from `N(0, cov)`.
pub fn sample_gaussian_signals(
    cov: &DenseSymMatrix,
    count: usize,
    seed: u64,
) -> Result<SignalBatch> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let factor = covariance_factor(cov)?;
    let n = cov.order();
    let mut normals = NormalStream::new(rng_from_seed(seed));
    let z = DMatrix::from_fn(n, count, |_, _| normals.next_normal());
    let x = &factor * z;
    let signals = x
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    SignalBatch::new(signals, seed, 0.0)
}

/// Adds independent `N(0, sigma^2 I)` noise to each signal.
pub fn add_noise(batch: &SignalBatch, sigma: f64, seed: u64) -> Result<SignalBatch> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(batch.clone());
    }
    let mut normals = NormalStream::new(rng_from_seed(seed));
    let signals = batch
        .signals
        .iter()
        .map(|s| s.iter().map(|v| v + sigma * normals.next_normal()).collect())
        .collect();
    Ok(SignalBatch {
        signals,
        seed: batch.seed,
        noise_sigma: batch.noise_sigma.hypot(sigma),
    })
}

/// `(1/K) Σ f f^T`.
pub fn empirical_covariance(batch: &SignalBatch) -> Result<DenseSymMatrix> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.dim();
    let k = batch.len();
    let x = DMatrix::from_fn(n, k, |i, c| batch.signals[c][i]);
    let s = (&x * x.transpose()) / k as f64;
    Ok(DenseSymMatrix::symmetrized(s))
}
