//! Companion checks: the clean-target (zero-anchored) penalty contrast,
//! odd-moment cancellation, the Gaussian fourth moment, idempotency, and
//! the contractive-penalty comparison.

use super::map::{directional_second_difference, SmoothMap};
use super::mc::{antithetic_mean, mc_clean_target_loss};
use super::TheoryError;
use crate::linalg::{dot, norm2, norm2_sq, Matrix};
use crate::rng::{normal_vec, Seeder};
use crate::scalar::Scalar;

/// Noisy-input / clean-target objective versus its expansion. The penalty
/// here anchors the Jacobian at zero (||J||_F^2); the symmetric-noise loss
/// anchors it at the identity (||J - I||_F^2). Both Frobenius terms are
/// reported side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanTargetReport {
    pub sigma: f64,
    pub mc_loss: f64,
    pub mc_stderr: f64,
    /// ||f(x) - y||^2.
    pub clean_loss: f64,
    /// ||J(x)||_F^2 — the zero-anchored penalty.
    pub jac_frob_sq: f64,
    /// ||J(x) - I||_F^2 — the identity-anchored penalty, for contrast.
    pub jac_minus_identity_frob_sq: f64,
    /// r . laplacian(f)(x), same curvature correction as the symmetric case.
    pub term_curv: f64,
    /// clean_loss + sigma^2 (jac_frob_sq + term_curv).
    pub expansion_value: f64,
}

impl CleanTargetReport {
    /// Whether the Monte-Carlo loss matches the expansion within k stderr.
    pub fn matches_expansion(&self, k: f64) -> bool {
        (self.mc_loss - self.expansion_value).abs() <= k * self.mc_stderr + 1e-12
    }
}

pub fn clean_target_terms<S: Scalar>(
    map: &dyn SmoothMap<S>,
    x: &[S],
    y: &[S],
    sigma: f64,
    pairs: u64,
    seeder: &Seeder,
    label: &str,
) -> Result<CleanTargetReport, TheoryError> {
    let fx = map.eval(x)?;
    let r: Vec<S> = fx.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let jac = map.jacobian(x)?;
    let lap = map.laplacian(x)?;
    let clean_loss = norm2_sq(&r).to_f64_lossy();
    let jac_frob_sq = jac.frob_sq().to_f64_lossy();
    let jac_minus_identity_frob_sq = jac.sub_identity_frob_sq().to_f64_lossy();
    let term_curv = dot(&r, &lap).to_f64_lossy();
    let mc = mc_clean_target_loss(map, x, y, sigma, pairs, seeder, label)?;
    Ok(CleanTargetReport {
        sigma,
        mc_loss: mc.mean,
        mc_stderr: mc.stderr,
        clean_loss,
        jac_frob_sq,
        jac_minus_identity_frob_sq,
        term_curv,
        expansion_value: clean_loss + sigma * sigma * (jac_frob_sq + term_curv),
    })
}

/// The cross term eps' (J - I)' A(eps, eps) between the linear and
/// quadratic Taylor pieces. Its expectation vanishes by odd symmetry; the
/// raw mean must be statistically zero, and the antithetic pair mean
/// cancels to exactly zero, which is the symmetrization step of the
/// expansion made literal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddMomentReport {
    pub sigma: f64,
    pub raw_mean: f64,
    pub raw_stderr: f64,
    pub antithetic_mean: f64,
    pub samples: u64,
}

impl OddMomentReport {
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.raw_mean.abs() <= k * self.raw_stderr + 1e-12
    }
}

pub fn odd_moment_check<S: Scalar>(
    map: &dyn SmoothMap<S>,
    x_hat: &[S],
    sigma: f64,
    samples: u64,
    seeder: &Seeder,
    label: &str,
) -> Result<OddMomentReport, TheoryError> {
    let d = map.dim();
    if x_hat.len() != d {
        return Err(TheoryError::Dim { got: x_hat.len(), want: d });
    }
    let jac = map.jacobian(x_hat)?;
    let phi = |eps: &[S]| -> Result<f64, TheoryError> {
        let a = directional_second_difference(map, x_hat, eps, 1e-3)?;
        // eps' M' a with M = J - I: accumulate (M eps) . a.
        let mut acc = S::zero();
        for k in 0..d {
            let mut row = S::zero();
            for i in 0..d {
                let m = jac[(k, i)] - if i == k { S::one() } else { S::zero() };
                row += m * eps[i];
            }
            acc += row * a[k];
        }
        Ok(acc.to_f64_lossy())
    };
    // Raw mean: each draw used directly, no cancellation built in.
    let raw = antithetic_mean::<S, _>(d, sigma, samples, seeder, label, |eps| phi(eps))?;
    // Antithetic pair mean: the same statistic symmetrized; odd terms
    // cancel exactly, pair by pair.
    let paired = antithetic_mean::<S, _>(d, sigma, samples, seeder, label, |eps| {
        let neg: Vec<S> = eps.iter().map(|&e| -e).collect();
        Ok(0.5 * (phi(eps)? + phi(&neg)?))
    })?;
    Ok(OddMomentReport {
        sigma,
        raw_mean: raw.mean,
        raw_stderr: raw.stderr,
        antithetic_mean: paired.mean,
        samples: raw.pairs,
    })
}

/// Monte-Carlo check of E ||eps||^4 = (d^2 + 2d) sigma^4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub dim: usize,
    pub sigma: f64,
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
    pub samples: u64,
}

impl MomentReport {
    pub fn pass(&self, k: f64) -> bool {
        (self.mean - self.expected).abs() <= k * self.stderr + 1e-12
    }
}

pub fn gaussian_moment_check(
    dim: usize,
    sigma: f64,
    samples: u64,
    seeder: &Seeder,
    label: &str,
) -> MomentReport {
    let expected = ((dim * dim + 2 * dim) as f64) * sigma.powi(4);
    if sigma == 0.0 {
        return MomentReport { dim, sigma, mean: 0.0, stderr: 0.0, expected, samples: 0 };
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut rng = seeder.stream(label);
    for _ in 0..samples {
        let eps = normal_vec::<f64, _>(&mut rng, dim, sigma);
        let v = norm2_sq(&eps).powi(2);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    MomentReport { dim, sigma, mean, stderr: (var / n).sqrt(), expected, samples }
}

/// How far f is from idempotent at x_hat, and the pieces that bound it:
///   f(f(x_hat)) - f(x_hat) = (f(x) - x) + (J(x) - I)(f(x_hat) - x) + R2,
/// with ||R2|| <= L/2 ||f(x_hat) - x||^2 for a Jacobian-Lipschitz bound L
/// probed along the segment from x to f(x_hat).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdempotencyReport {
    /// ||f(f(x_hat)) - f(x_hat)||.
    pub gap: f64,
    /// On-manifold bias ||f(x) - x||.
    pub bias: f64,
    /// Squared reconstruction distance ||f(x_hat) - x||^2.
    pub distance_sq: f64,
    /// ||(J(x) - I)(f(x_hat) - x)||, when the Jacobian is feasible.
    pub tangent_term: Option<f64>,
    /// Probed Jacobian Lipschitz constant along the segment.
    pub jacobian_lipschitz: Option<f64>,
    /// bias + tangent + L/2 * distance^2.
    pub bound: Option<f64>,
    pub holds: Option<bool>,
}

pub fn idempotency_gap<S: Scalar>(
    map: &dyn SmoothMap<S>,
    x_hat: &[S],
    x: &[S],
    probe_jacobian: bool,
) -> Result<IdempotencyReport, TheoryError> {
    let y1 = map.eval(x_hat)?;
    let y2 = map.eval(&y1)?;
    let gap_vec: Vec<S> = y2.iter().zip(&y1).map(|(&a, &b)| a - b).collect();
    let fx = map.eval(x)?;
    let bias_vec: Vec<S> = fx.iter().zip(x).map(|(&a, &b)| a - b).collect();
    let dist_vec: Vec<S> = y1.iter().zip(x).map(|(&a, &b)| a - b).collect();
    let gap = norm2(&gap_vec).to_f64_lossy();
    let bias = norm2(&bias_vec).to_f64_lossy();
    let distance_sq = norm2_sq(&dist_vec).to_f64_lossy();
    if !probe_jacobian {
        return Ok(IdempotencyReport {
            gap,
            bias,
            distance_sq,
            tangent_term: None,
            jacobian_lipschitz: None,
            bound: None,
            holds: None,
        });
    }
    let jac_x = map.jacobian(x)?;
    let mut tangent = vec![S::zero(); map.dim()];
    for k in 0..map.dim() {
        let mut acc = S::zero();
        for i in 0..map.dim() {
            let m = jac_x[(k, i)] - if i == k { S::one() } else { S::zero() };
            acc += m * dist_vec[i];
        }
        tangent[k] = acc;
    }
    let tangent_term = norm2(&tangent).to_f64_lossy();
    // Lipschitz probe: Jacobians at points along the segment x -> f(x_hat).
    let probes = 5usize;
    let mut lipschitz = 0.0f64;
    let mut prev: Option<(Vec<S>, Matrix<S>)> = None;
    for p in 0..=probes {
        let t = S::cst(p as f64 / probes as f64);
        let point: Vec<S> = x.iter().zip(&y1).map(|(&a, &b)| a + t * (b - a)).collect();
        let jac = map.jacobian(&point)?;
        if let Some((prev_point, prev_jac)) = &prev {
            let dist: f64 = point
                .iter()
                .zip(prev_point)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<S>()
                .sqrt()
                .to_f64_lossy();
            if dist > 0.0 {
                let mut diff_sq = S::zero();
                for k in 0..map.dim() {
                    for i in 0..map.dim() {
                        let d = jac[(k, i)] - prev_jac[(k, i)];
                        diff_sq += d * d;
                    }
                }
                lipschitz = lipschitz.max(diff_sq.sqrt().to_f64_lossy() / dist);
            }
        }
        prev = Some((point, jac));
    }
    let bound = bias + tangent_term + 0.5 * lipschitz * distance_sq;
    Ok(IdempotencyReport {
        gap,
        bias,
        distance_sq,
        tangent_term: Some(tangent_term),
        jacobian_lipschitz: Some(lipschitz),
        bound: Some(bound),
        holds: Some(gap <= bound * (1.0 + 1e-9) + 1e-12),
    })
}

/// The two terms of the contractive objective at a clean point:
/// (||f(x) - x||^2, ||J(x)||_F^2).
pub fn contractive_penalty<S: Scalar>(map: &dyn SmoothMap<S>, x: &[S]) -> Result<(f64, f64), TheoryError> {
    let fx = map.eval(x)?;
    let r: Vec<S> = fx.iter().zip(x).map(|(&a, &b)| a - b).collect();
    let jac = map.jacobian(x)?;
    Ok((norm2_sq(&r).to_f64_lossy(), jac.frob_sq().to_f64_lossy()))
}
