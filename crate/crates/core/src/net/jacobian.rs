//! Exact input Jacobian and finite-difference component Laplacian.

use super::{LayerSpec, NetError, Network, ParamVector};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Default guard on the Jacobian dimension; dense d x d storage grows
/// quadratically, so sizes far below the cap are the practical regime.
pub const JACOBIAN_DIM_CAP: usize = 4096;

/// Exact d x d Jacobian of the network at `x`, computed by pushing the
/// identity's columns through the linearization of every layer.
pub fn jacobian<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    x: &[S],
    cap: usize,
) -> Result<Matrix<S>, NetError> {
    let d = net.dim();
    if d > cap {
        return Err(NetError::JacobianCap { dim: d, cap });
    }
    let tape = net.forward_tape(params, x)?;
    // cols[i] is the derivative of the current layer output wrt input i.
    let mut cols: Vec<Vec<S>> = (0..d)
        .map(|i| {
            let mut e = vec![S::zero(); d];
            e[i] = S::one();
            e
        })
        .collect();
    for (li, layer) in net.config().layers.iter().enumerate() {
        match layer {
            LayerSpec::Activation(act) => {
                let out = &tape[li + 1];
                for col in cols.iter_mut() {
                    for (c, &o) in col.iter_mut().zip(out) {
                        *c *= act.derivative_from_output(o);
                    }
                }
            }
            _ => {
                for col in cols.iter_mut() {
                    *col = net.apply_linear(params, li, col);
                }
            }
        }
    }
    let mut jac = Matrix::zeros(d, d);
    for (i, col) in cols.iter().enumerate() {
        for k in 0..d {
            jac[(k, i)] = col[k];
        }
    }
    Ok(jac)
}

/// Component-wise Laplacian (sum over coordinates of second partials) via
/// central second differences with one Richardson extrapolation level.
pub fn laplacian<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    x: &[S],
    step: f64,
    cap: usize,
) -> Result<Vec<S>, NetError> {
    let d = net.dim();
    if d > cap {
        return Err(NetError::JacobianCap { dim: d, cap });
    }
    let coarse = second_difference_sum(net, params, x, S::cst(step))?;
    let fine = second_difference_sum(net, params, x, S::cst(step / 2.0))?;
    let third = S::cst(1.0 / 3.0);
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(&f, &c)| (S::cst(4.0) * f - c) * third)
        .collect())
}

fn second_difference_sum<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    x: &[S],
    h: S,
) -> Result<Vec<S>, NetError> {
    let d = net.dim();
    let center = net.forward(params, x)?;
    let two = S::cst(2.0);
    let inv_h2 = S::one() / (h * h);
    let mut acc = vec![S::zero(); d];
    let mut probe = x.to_vec();
    for i in 0..d {
        probe[i] = x[i] + h;
        let plus = net.forward(params, &probe)?;
        probe[i] = x[i] - h;
        let minus = net.forward(params, &probe)?;
        probe[i] = x[i];
        for k in 0..d {
            acc[k] += (plus[k] - two * center[k] + minus[k]) * inv_h2;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, LayerSpec, NetworkConfig};
    use crate::rng::{normal_vec, Seeder};

    fn dense_net(seed: u64, hidden: &[usize], d: usize, act: Activation) -> (Network, ParamVector<f64>) {
        let net = Network::new(NetworkConfig::dense_autoencoder((1, d, 1), hidden, act, Activation::Identity))
            .unwrap();
        let params = net.init_params(&mut Seeder::new(seed).stream("init"));
        (net, params)
    }

    #[test]
    fn identity_network_has_identity_jacobian() {
        let d = 4;
        let net = Network::new(NetworkConfig {
            input: (1, d, 1),
            layers: vec![LayerSpec::Dense { out: d }, LayerSpec::Activation(Activation::Identity)],
        })
        .unwrap();
        let mut params = ParamVector::zeros(net.param_len());
        for i in 0..d {
            params.values_mut()[i * d + i] = 1.0;
        }
        let j = jacobian(&net, &params, &[0.1, 0.2, 0.3, 0.4], JACOBIAN_DIM_CAP).unwrap();
        assert_eq!(j, Matrix::identity(d));
    }

    #[test]
    fn affine_jacobian_is_the_weight_matrix() {
        let d = 3;
        let net = Network::new(NetworkConfig {
            input: (1, d, 1),
            layers: vec![LayerSpec::Dense { out: d }, LayerSpec::Activation(Activation::Identity)],
        })
        .unwrap();
        let mut rng = Seeder::new(2).stream("init");
        let params = net.init_params::<f64>(&mut rng);
        let x = normal_vec::<f64, _>(&mut rng, d, 1.0);
        let j = jacobian(&net, &params, &x, JACOBIAN_DIM_CAP).unwrap();
        for k in 0..d {
            for i in 0..d {
                assert_eq!(j[(k, i)], params.values()[k * d + i]);
            }
        }
    }

    #[test]
    fn tanh_jacobian_matches_finite_differences() {
        let (net, params) = dense_net(3, &[5, 3], 6, Activation::Tanh);
        let mut rng = Seeder::new(4).stream("x");
        let x = normal_vec::<f64, _>(&mut rng, 6, 0.5);
        let j = jacobian(&net, &params, &x, JACOBIAN_DIM_CAP).unwrap();
        let h = 1e-5;
        let mut probe = x.clone();
        for i in 0..6 {
            probe[i] = x[i] + h;
            let plus = net.forward(&params, &probe).unwrap();
            probe[i] = x[i] - h;
            let minus = net.forward(&params, &probe).unwrap();
            probe[i] = x[i];
            for k in 0..6 {
                let fd = (plus[k] - minus[k]) / (2.0 * h);
                let denom = j[(k, i)].abs().max(1e-6);
                assert!(
                    ((j[(k, i)] - fd) / denom).abs() < 1e-5,
                    "J[{k}][{i}] = {} vs fd {fd}",
                    j[(k, i)]
                );
            }
        }
    }

    #[test]
    fn jacobian_cap_enforced() {
        let (net, params) = dense_net(1, &[2], 4, Activation::Tanh);
        assert!(matches!(
            jacobian(&net, &params, &[0.0; 4], 3),
            Err(NetError::JacobianCap { dim: 4, cap: 3 })
        ));
    }

    #[test]
    fn affine_laplacian_is_zero() {
        let d = 4;
        let net = Network::new(NetworkConfig {
            input: (1, d, 1),
            layers: vec![LayerSpec::Dense { out: d }, LayerSpec::Activation(Activation::Identity)],
        })
        .unwrap();
        let mut rng = Seeder::new(5).stream("init");
        let params = net.init_params::<f64>(&mut rng);
        let x = normal_vec::<f64, _>(&mut rng, d, 1.0);
        let lap = laplacian(&net, &params, &x, 1e-3, JACOBIAN_DIM_CAP).unwrap();
        for v in lap {
            assert!(v.abs() < 1e-7, "affine Laplacian must vanish, got {v}");
        }
    }

    #[test]
    fn sigmoid_laplacian_matches_hessian_trace_oracle() {
        let (net, params) = dense_net(6, &[4], 5, Activation::Sigmoid);
        let mut rng = Seeder::new(7).stream("x");
        let x = normal_vec::<f64, _>(&mut rng, 5, 0.4);
        let lap = laplacian(&net, &params, &x, 1e-3, JACOBIAN_DIM_CAP).unwrap();
        // Oracle: full Hessian trace by nested central differences.
        let h = 1e-4;
        for k in 0..5 {
            let mut trace = 0.0;
            for i in 0..5 {
                let mut probe = x.clone();
                probe[i] = x[i] + h;
                let plus = net.forward(&params, &probe).unwrap()[k];
                probe[i] = x[i] - h;
                let minus = net.forward(&params, &probe).unwrap()[k];
                let center = net.forward(&params, &x).unwrap()[k];
                trace += (plus - 2.0 * center + minus) / (h * h);
            }
            assert!((lap[k] - trace).abs() < 1e-4, "component {k}: {} vs {trace}", lap[k]);
        }
    }
}
