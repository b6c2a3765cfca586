//! Training losses and their exact parameter gradients.
//!
//! Loss values are reported in sum-of-squares form, matching the expansion
//! the verifier checks; training differentiates the per-element mean so
//! learning rates transfer across image sizes.

use super::{backprop, NetError, Network, ParamVector};
use crate::image::Mask;
use crate::scalar::Scalar;

/// The residual r = f(x_hat) - x, elementwise.
pub fn residual<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    x_hat: &[S],
    x: &[S],
) -> Result<Vec<S>, NetError> {
    let y = net.forward(params, x_hat)?;
    Ok(y.iter().zip(x).map(|(&a, &b)| a - b).collect())
}

/// Plain reconstruction loss ||f(x_hat) - x||^2 (sum of squares).
pub fn loss_dae<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    x_hat: &[S],
    x: &[S],
) -> Result<S, NetError> {
    let y = net.forward(params, x_hat)?;
    Ok(y.iter().zip(x).map(|(&a, &b)| (a - b) * (a - b)).sum())
}

/// Symmetric-noise loss ||f(x_hat + eps) - (x + eps)||^2: the same noise
/// realization is added to input and target.
pub fn loss_fae<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    x_hat: &[S],
    x: &[S],
    eps: &[S],
) -> Result<S, NetError> {
    debug_assert_eq!(x_hat.len(), eps.len());
    let input: Vec<S> = x_hat.iter().zip(eps).map(|(&a, &e)| a + e).collect();
    let target: Vec<S> = x.iter().zip(eps).map(|(&a, &e)| a + e).collect();
    loss_dae(net, params, &input, &target)
}

/// Region-weighted loss: complement and mask terms are normalized by their
/// own mask mass; a zero-mass region contributes nothing.
pub fn loss_weighted<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    x_hat: &[S],
    x: &[S],
    mask: &Mask<S>,
    lambda: S,
) -> Result<S, NetError> {
    debug_assert!(lambda >= S::zero() && lambda <= S::one());
    let y = net.forward(params, x_hat)?;
    let (h, w) = (mask.height(), mask.width());
    let channels = x.len() / (h * w);
    let mut mass_m = S::zero();
    let mut mass_c = S::zero();
    let mut term_m = S::zero();
    let mut term_c = S::zero();
    for p in 0..h * w {
        let m = mask.data()[p];
        let c = S::one() - m;
        for ch in 0..channels {
            let r = y[p * channels + ch] - x[p * channels + ch];
            mass_m += m;
            mass_c += c;
            term_m += (m * r) * (m * r);
            term_c += (c * r) * (c * r);
        }
    }
    let mut total = S::zero();
    if mass_c > S::zero() {
        total += (S::one() - lambda) / mass_c * term_c;
    }
    if mass_m > S::zero() {
        total += lambda / mass_m * term_m;
    }
    Ok(total)
}

/// Which objective a gradient step differentiates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind<S> {
    Dae,
    Weighted { lambda: S },
}

/// One batch element; the mask is only consulted by the weighted loss.
pub struct GradSample<'a, S> {
    pub input: &'a [S],
    pub target: &'a [S],
    pub mask: Option<&'a Mask<S>>,
}

/// Exact reverse-mode gradient of the mean per-element batch loss; returns
/// the gradient and the loss value it differentiates.
pub fn batch_gradient<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    batch: &[GradSample<'_, S>],
    kind: LossKind<S>,
) -> Result<(Vec<S>, S), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let d = S::cst(net.dim() as f64);
    let scale = S::one() / (S::cst(batch.len() as f64) * d);
    let mut grad = vec![S::zero(); net.param_len()];
    let mut loss = S::zero();
    for sample in batch {
        let tape = net.forward_tape(params, sample.input)?;
        let y = tape.last().expect("tape nonempty");
        let two = S::cst(2.0);
        let mut g = Vec::with_capacity(y.len());
        match kind {
            LossKind::Dae => {
                for (&yi, &ti) in y.iter().zip(sample.target) {
                    let r = yi - ti;
                    loss += scale * r * r;
                    g.push(two * scale * r);
                }
            }
            LossKind::Weighted { lambda } => {
                let mask = sample.mask.expect("weighted loss requires a mask");
                let pixels = mask.height() * mask.width();
                let channels = y.len() / pixels;
                let mut mass_m = S::zero();
                for &m in mask.data() {
                    mass_m += m;
                }
                mass_m *= S::cst(channels as f64);
                let mass_c = S::cst(y.len() as f64) - mass_m;
                for p in 0..pixels {
                    let m = mask.data()[p];
                    let c = S::one() - m;
                    for ch in 0..channels {
                        let i = p * channels + ch;
                        let r = y[i] - sample.target[i];
                        let mut li = S::zero();
                        let mut gi = S::zero();
                        if mass_c > S::zero() {
                            li += (S::one() - lambda) / mass_c * (c * r) * (c * r);
                            gi += two * (S::one() - lambda) / mass_c * c * c * r;
                        }
                        if mass_m > S::zero() {
                            li += lambda / mass_m * (m * r) * (m * r);
                            gi += two * lambda / mass_m * m * m * r;
                        }
                        loss += scale * li;
                        g.push(scale * gi);
                    }
                }
            }
        }
        backprop(net, params, &tape, g, &mut grad);
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(NetError::NonFiniteGradient);
    }
    Ok((grad, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, LayerSpec, NetworkConfig};
    use crate::rng::{normal_vec, Seeder};

    fn identity_net(d: usize) -> (Network, ParamVector<f64>) {
        let net = Network::new(NetworkConfig {
            input: (1, d, 1),
            layers: vec![LayerSpec::Dense { out: d }, LayerSpec::Activation(Activation::Identity)],
        })
        .unwrap();
        let mut params = ParamVector::zeros(net.param_len());
        for i in 0..d {
            params.values_mut()[i * d + i] = 1.0;
        }
        (net, params)
    }

    fn random_net(seed: u64) -> (Network, ParamVector<f64>) {
        let net = Network::new(NetworkConfig::dense_autoencoder(
            (2, 5, 1),
            &[6, 3],
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap();
        let params = net.init_params(&mut Seeder::new(seed).stream("init"));
        (net, params)
    }

    #[test]
    fn dae_zero_at_exact_reconstruction() {
        let (net, params) = identity_net(4);
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(loss_dae(&net, &params, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn dae_single_coordinate_residual() {
        let (net, params) = identity_net(4);
        let x = [0.1, 0.2, 0.3, 0.4];
        let delta = 0.05;
        let mut x_hat = x;
        x_hat[0] += delta;
        let loss = loss_dae(&net, &params, &x_hat, &x).unwrap();
        assert!((loss - delta * delta).abs() < 1e-15);
    }

    #[test]
    fn dae_matches_recomputation_from_forward() {
        let (net, params) = random_net(3);
        let mut rng = Seeder::new(4).stream("x");
        let x_hat = normal_vec::<f64, _>(&mut rng, 10, 0.5);
        let x = normal_vec::<f64, _>(&mut rng, 10, 0.5);
        let y = net.forward(&params, &x_hat).unwrap();
        let expected: f64 = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((loss_dae(&net, &params, &x_hat, &x).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn fae_with_zero_noise_is_dae() {
        let (net, params) = random_net(5);
        let mut rng = Seeder::new(6).stream("x");
        let x_hat = normal_vec::<f64, _>(&mut rng, 10, 0.3);
        let x = normal_vec::<f64, _>(&mut rng, 10, 0.3);
        let eps = vec![0.0; 10];
        assert_eq!(
            loss_fae(&net, &params, &x_hat, &x, &eps).unwrap(),
            loss_dae(&net, &params, &x_hat, &x).unwrap()
        );
    }

    #[test]
    fn fae_on_identity_network_ignores_noise() {
        let (net, params) = identity_net(6);
        let mut rng = Seeder::new(7).stream("x");
        let x_hat = normal_vec::<f64, _>(&mut rng, 6, 0.4);
        let x = normal_vec::<f64, _>(&mut rng, 6, 0.4);
        let base = loss_dae(&net, &params, &x_hat, &x).unwrap();
        for _ in 0..5 {
            let eps = normal_vec::<f64, _>(&mut rng, 6, 0.2);
            let v = loss_fae(&net, &params, &x_hat, &x, &eps).unwrap();
            assert!((v - base).abs() < 1e-12, "noise must cancel for identity");
        }
    }

    #[test]
    fn fae_affine_closed_form() {
        // Affine map f(v) = Av + b: value is exactly ||r + (A - I) eps||^2.
        let d = 5;
        let net = Network::new(NetworkConfig {
            input: (1, d, 1),
            layers: vec![LayerSpec::Dense { out: d }, LayerSpec::Activation(Activation::Identity)],
        })
        .unwrap();
        let mut rng = Seeder::new(8).stream("affine");
        let params = net.init_params::<f64>(&mut rng);
        let x_hat = normal_vec::<f64, _>(&mut rng, d, 0.5);
        let x = normal_vec::<f64, _>(&mut rng, d, 0.5);
        let eps = normal_vec::<f64, _>(&mut rng, d, 0.1);
        let y = net.forward(&params, &x_hat).unwrap();
        let w = &params.values()[..d * d];
        let mut expected = 0.0;
        for k in 0..d {
            let r_k = y[k] - x[k];
            let mut a_minus_i_eps = 0.0;
            for i in 0..d {
                let a = w[k * d + i] - if i == k { 1.0 } else { 0.0 };
                a_minus_i_eps += a * eps[i];
            }
            expected += (r_k + a_minus_i_eps).powi(2);
        }
        let got = loss_fae(&net, &params, &x_hat, &x, &eps).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn weighted_zero_mask_reduces_to_complement_term() {
        let (net, params) = random_net(9);
        let mut rng = Seeder::new(10).stream("x");
        let x_hat = normal_vec::<f64, _>(&mut rng, 10, 0.3);
        let x = normal_vec::<f64, _>(&mut rng, 10, 0.3);
        let mask = Mask::zeros(2, 5);
        let loss = loss_weighted(&net, &params, &x_hat, &x, &mask, 0.5).unwrap();
        let dae = loss_dae(&net, &params, &x_hat, &x).unwrap();
        assert!((loss - 0.5 / 10.0 * dae).abs() < 1e-13);
        // lambda = 0 gives the pure complement term.
        let l0 = loss_weighted(&net, &params, &x_hat, &x, &mask, 0.0).unwrap();
        assert!((l0 - dae / 10.0).abs() < 1e-13);
    }

    #[test]
    fn weighted_uniform_half_mask_hand_value() {
        // f identity, x_hat = x + delta: both terms equal, total 0.5 delta^2.
        let (net, params) = identity_net(8);
        let x = vec![0.2; 8];
        let delta = 0.3;
        let x_hat: Vec<f64> = x.iter().map(|v| v + delta).collect();
        let mask = Mask::new(2, 4, vec![0.5; 8]).unwrap();
        let loss = loss_weighted(&net, &params, &x_hat, &x, &mask, 0.5).unwrap();
        assert!((loss - 0.5 * delta * delta).abs() < 1e-12, "got {loss}");
    }

    #[test]
    fn gradient_zero_at_stationary_point() {
        let (net, params) = identity_net(4);
        let x = vec![0.3, 0.6, 0.1, 0.9];
        let batch = [GradSample { input: &x, target: &x, mask: None }];
        let (grad, loss) = batch_gradient(&net, &params, &batch, LossKind::Dae).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_hand_derivative_scalar_case() {
        // d = 1, f(v) = w v (no bias term active), loss (wv - t)^2.
        let net = Network::new(NetworkConfig {
            input: (1, 1, 1),
            layers: vec![LayerSpec::Dense { out: 1 }, LayerSpec::Activation(Activation::Identity)],
        })
        .unwrap();
        let mut params = ParamVector::zeros(net.param_len());
        params.values_mut()[0] = 1.7;
        let (v, t) = (0.4f64, 0.9f64);
        let batch = [GradSample { input: &[v], target: &[t], mask: None }];
        let (grad, _) = batch_gradient(&net, &params, &batch, LossKind::Dae).unwrap();
        let expected_dw = 2.0 * (1.7 * v - t) * v;
        let expected_db = 2.0 * (1.7 * v - t);
        assert!((grad[0] - expected_dw).abs() < 1e-14);
        assert!((grad[1] - expected_db).abs() < 1e-14);
    }

    #[test]
    fn empty_batch_rejected() {
        let (net, params) = identity_net(2);
        assert!(matches!(
            batch_gradient(&net, &params, &[], LossKind::<f64>::Dae),
            Err(NetError::EmptyBatch)
        ));
    }

    /// Central-difference oracle for the mean per-element batch loss.
    fn fd_gradient(
        net: &Network,
        params: &ParamVector<f64>,
        batch: &[GradSample<'_, f64>],
        kind: LossKind<f64>,
        h: f64,
    ) -> Vec<f64> {
        let eval = |p: &ParamVector<f64>| -> f64 {
            let d = net.dim() as f64;
            let scale = 1.0 / (batch.len() as f64 * d);
            batch
                .iter()
                .map(|s| match kind {
                    LossKind::Dae => loss_dae(net, p, s.input, s.target).unwrap(),
                    LossKind::Weighted { lambda } => {
                        loss_weighted(net, p, s.input, s.target, s.mask.unwrap(), lambda).unwrap()
                    }
                })
                .sum::<f64>()
                * scale
        };
        let mut grad = Vec::with_capacity(params.len());
        let mut probe = params.clone();
        for i in 0..params.len() {
            let orig = params.values()[i];
            probe.values_mut()[i] = orig + h;
            let plus = eval(&probe);
            probe.values_mut()[i] = orig - h;
            let minus = eval(&probe);
            probe.values_mut()[i] = orig;
            grad.push((plus - minus) / (2.0 * h));
        }
        grad
    }

    fn assert_fd_agreement(analytic: &[f64], fd: &[f64], tol: f64) {
        let norm: f64 = analytic.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-8);
        for (i, (a, f)) in analytic.iter().zip(fd).enumerate() {
            let rel = (a - f).abs() / norm.max(a.abs());
            assert!(rel < tol, "component {i}: analytic {a} vs fd {f} (rel {rel})");
        }
    }

    #[test]
    fn gradient_matches_finite_differences_tanh_and_sigmoid() {
        for (seed, act) in [(11u64, Activation::Tanh), (12, Activation::Sigmoid)] {
            let net = Network::new(NetworkConfig::dense_autoencoder(
                (2, 5, 1),
                &[6, 4],
                act,
                Activation::Identity,
            ))
            .unwrap();
            let params = net.init_params(&mut Seeder::new(seed).stream("init"));
            let mut rng = Seeder::new(seed + 100).stream("x");
            let input = normal_vec::<f64, _>(&mut rng, 10, 0.5);
            let target = normal_vec::<f64, _>(&mut rng, 10, 0.5);
            let batch = [GradSample { input: &input, target: &target, mask: None }];
            let (grad, _) = batch_gradient(&net, &params, &batch, LossKind::Dae).unwrap();
            let fd = fd_gradient(&net, &params, &batch, LossKind::Dae, 1e-5);
            assert_fd_agreement(&grad, &fd, 1e-5);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_conv_and_weighted() {
        let net = Network::new(NetworkConfig::conv_stack(
            (4, 4, 1),
            &[3],
            3,
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap();
        let params = net.init_params(&mut Seeder::new(21).stream("init"));
        let mut rng = Seeder::new(22).stream("x");
        let input = normal_vec::<f64, _>(&mut rng, 16, 0.5);
        let target = normal_vec::<f64, _>(&mut rng, 16, 0.5);
        let mask = Mask::new(4, 4, (0..16).map(|i| if i % 3 == 0 { 0.8 } else { 0.0 }).collect()).unwrap();
        let kind = LossKind::Weighted { lambda: 0.5 };
        let batch = [GradSample { input: &input, target: &target, mask: Some(&mask) }];
        let (grad, _) = batch_gradient(&net, &params, &batch, kind).unwrap();
        let fd = fd_gradient(&net, &params, &batch, kind, 1e-5);
        assert_fd_agreement(&grad, &fd, 1e-5);
    }

    #[test]
    fn gradient_matches_finite_differences_relu_away_from_kinks() {
        let net = Network::new(NetworkConfig::dense_autoencoder(
            (1, 6, 1),
            &[5],
            Activation::Relu,
            Activation::Identity,
        ))
        .unwrap();
        let params = net.init_params(&mut Seeder::new(31).stream("init"));
        let mut rng = Seeder::new(32).stream("x");
        // Resample probes until all pre-activations sit clear of the kink.
        let (input, target) = loop {
            let input = normal_vec::<f64, _>(&mut rng, 6, 1.0);
            let target = normal_vec::<f64, _>(&mut rng, 6, 1.0);
            let tape = net.forward_tape(&params, &input).unwrap();
            // tape[1] is the dense pre-activation feeding the ReLU.
            if tape[1].iter().all(|z| z.abs() > 1e-3) {
                break (input, target);
            }
        };
        let batch = [GradSample { input: &input, target: &target, mask: None }];
        let (grad, _) = batch_gradient(&net, &params, &batch, LossKind::Dae).unwrap();
        let fd = fd_gradient(&net, &params, &batch, LossKind::Dae, 1e-6);
        assert_fd_agreement(&grad, &fd, 1e-4);
    }
}
