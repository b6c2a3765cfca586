//! Antithetic Monte-Carlo engine.
//!
//! Estimates are averages of pair statistics t(eps) computed from +-eps;
//! odd integrand components cancel exactly inside each pair. Sampling is
//! chunked with one substream per chunk and merged in fixed index order, so
//! results are identical for any worker count, and reusing a seed label
//! across sigma values gives common random numbers.

use rayon::prelude::*;

use super::map::SmoothMap;
use super::TheoryError;
use crate::linalg::norm2_sq;
use crate::rng::{normal_vec, Seeder};
use crate::scalar::Scalar;

const CHUNK_PAIRS: u64 = 4096;

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub pairs: u64,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: 0.0, pairs: 0 }
    }

    /// |mean - reference| within `k` standard errors (with a tiny absolute
    /// floor so exact-zero-variance cases compare cleanly).
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.stderr + 1e-12
    }
}

/// Mean of t(eps) over `pairs` antithetic pairs, eps ~ N(0, sigma^2 I).
/// The statistic receives the raw standard-normal draw z and sigma, and
/// must itself average its +-eps evaluations.
pub fn antithetic_mean<S, F>(
    dim: usize,
    sigma: f64,
    pairs: u64,
    seeder: &Seeder,
    label: &str,
    statistic: F,
) -> Result<McEstimate, TheoryError>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<f64, TheoryError> + Sync,
{
    debug_assert!(pairs >= 1);
    let n_chunks = pairs.div_ceil(CHUNK_PAIRS);
    let chunk_results: Vec<Result<Moments, TheoryError>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = seeder.stream_indexed(label, chunk);
            let in_chunk = CHUNK_PAIRS.min(pairs - chunk * CHUNK_PAIRS);
            let mut acc = Moments::default();
            for _ in 0..in_chunk {
                let eps = normal_vec::<S, _>(&mut rng, dim, S::cst(sigma));
                acc.push(statistic(&eps)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Moments::default();
    for r in chunk_results {
        total.merge(&r?);
    }
    Ok(total.estimate())
}

/// Welford running moments; chunk merges happen in fixed index order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    fn estimate(&self) -> McEstimate {
        let stderr = if self.n > 1 {
            ((self.m2 / (self.n as f64 - 1.0)).max(0.0) / self.n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate { mean: self.mean, stderr, pairs: self.n }
    }
}

/// Antithetic estimate of E ||f(x_hat + eps) - (x + eps)||^2. Zero sigma
/// short-circuits to the deterministic loss with zero standard error.
pub fn mc_fae_loss<S: Scalar>(
    map: &dyn SmoothMap<S>,
    x_hat: &[S],
    x: &[S],
    sigma: f64,
    pairs: u64,
    seeder: &Seeder,
    label: &str,
) -> Result<McEstimate, TheoryError> {
    check_dims(map, &[x_hat, x])?;
    check_sampling(sigma, pairs)?;
    if sigma == 0.0 {
        let y = map.eval(x_hat)?;
        let r: Vec<S> = y.iter().zip(x).map(|(&a, &b)| a - b).collect();
        return Ok(McEstimate::exact(norm2_sq(&r).to_f64_lossy()));
    }
    antithetic_mean::<S, _>(map.dim(), sigma, pairs, seeder, label, |eps| {
        Ok(0.5 * (symmetric_loss(map, x_hat, x, eps, false)? + symmetric_loss(map, x_hat, x, eps, true)?))
    })
}

/// Antithetic estimate of the noisy-input / clean-target objective
/// E ||f(x + eps) - y||^2.
pub fn mc_clean_target_loss<S: Scalar>(
    map: &dyn SmoothMap<S>,
    x: &[S],
    y: &[S],
    sigma: f64,
    pairs: u64,
    seeder: &Seeder,
    label: &str,
) -> Result<McEstimate, TheoryError> {
    check_dims(map, &[x, y])?;
    check_sampling(sigma, pairs)?;
    if sigma == 0.0 {
        let fx = map.eval(x)?;
        let r: Vec<S> = fx.iter().zip(y).map(|(&a, &b)| a - b).collect();
        return Ok(McEstimate::exact(norm2_sq(&r).to_f64_lossy()));
    }
    antithetic_mean::<S, _>(map.dim(), sigma, pairs, seeder, label, |eps| {
        let one = clean_target_loss(map, x, y, eps, false)?;
        let two = clean_target_loss(map, x, y, eps, true)?;
        Ok(0.5 * (one + two))
    })
}

fn symmetric_loss<S: Scalar>(
    map: &dyn SmoothMap<S>,
    x_hat: &[S],
    x: &[S],
    eps: &[S],
    negate: bool,
) -> Result<f64, TheoryError> {
    let sign = if negate { -S::one() } else { S::one() };
    let input: Vec<S> = x_hat.iter().zip(eps).map(|(&a, &e)| a + sign * e).collect();
    let y = map.eval(&input)?;
    let mut acc = S::zero();
    for k in 0..y.len() {
        let r = y[k] - (x[k] + sign * eps[k]);
        acc += r * r;
    }
    Ok(acc.to_f64_lossy())
}

fn clean_target_loss<S: Scalar>(
    map: &dyn SmoothMap<S>,
    x: &[S],
    y: &[S],
    eps: &[S],
    negate: bool,
) -> Result<f64, TheoryError> {
    let sign = if negate { -S::one() } else { S::one() };
    let input: Vec<S> = x.iter().zip(eps).map(|(&a, &e)| a + sign * e).collect();
    let fx = map.eval(&input)?;
    let mut acc = S::zero();
    for k in 0..fx.len() {
        let r = fx[k] - y[k];
        acc += r * r;
    }
    Ok(acc.to_f64_lossy())
}

fn check_dims<S: Scalar>(map: &dyn SmoothMap<S>, vecs: &[&[S]]) -> Result<(), TheoryError> {
    for v in vecs {
        if v.len() != map.dim() {
            return Err(TheoryError::Dim { got: v.len(), want: map.dim() });
        }
    }
    Ok(())
}

fn check_sampling(sigma: f64, pairs: u64) -> Result<(), TheoryError> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(TheoryError::Invalid(format!("sigma {sigma} must be finite and non-negative")));
    }
    if sigma > 0.0 && pairs < 2 {
        return Err(TheoryError::Invalid("need at least 2 antithetic pairs".into()));
    }
    Ok(())
}
