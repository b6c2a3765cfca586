//! Differentiable vector fields the verifier can probe.
//!
//! Networks and analytic fixtures share one interface: evaluation plus
//! Jacobian and component-Laplacian access. Fixtures implement `eval`
//! analytically and inherit the generic finite-difference derivatives, so
//! hand-derived expectations in tests stay independent oracles.

use super::TheoryError;
use crate::linalg::Matrix;
use crate::net::{jacobian as net_jacobian, laplacian as net_laplacian, Network, ParamVector};
use crate::scalar::Scalar;

/// Central-difference step for first derivatives.
pub const FD_JACOBIAN_STEP: f64 = 1e-5;
/// Step for second differences; one Richardson level is applied on top.
pub const FD_LAPLACIAN_STEP: f64 = 1e-3;

/// A map R^d -> R^d assumed smooth enough for the expansion being checked.
pub trait SmoothMap<S: Scalar>: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[S]) -> Result<Vec<S>, TheoryError>;

    fn jacobian(&self, x: &[S]) -> Result<Matrix<S>, TheoryError> {
        fd_jacobian(self, x, S::cst(FD_JACOBIAN_STEP))
    }

    fn laplacian(&self, x: &[S]) -> Result<Vec<S>, TheoryError> {
        fd_laplacian(self, x, FD_LAPLACIAN_STEP)
    }
}

/// Central-difference Jacobian, one column per coordinate.
pub fn fd_jacobian<S: Scalar, M: SmoothMap<S> + ?Sized>(
    map: &M,
    x: &[S],
    h: S,
) -> Result<Matrix<S>, TheoryError> {
    let d = map.dim();
    let mut jac = Matrix::zeros(d, d);
    let mut probe = x.to_vec();
    let half = S::one() / (S::cst(2.0) * h);
    for i in 0..d {
        probe[i] = x[i] + h;
        let plus = map.eval(&probe)?;
        probe[i] = x[i] - h;
        let minus = map.eval(&probe)?;
        probe[i] = x[i];
        for k in 0..d {
            jac[(k, i)] = (plus[k] - minus[k]) * half;
        }
    }
    Ok(jac)
}

/// Second differences along each coordinate with one Richardson level;
/// exact through quartic terms.
pub fn fd_laplacian<S: Scalar, M: SmoothMap<S> + ?Sized>(
    map: &M,
    x: &[S],
    step: f64,
) -> Result<Vec<S>, TheoryError> {
    let coarse = second_difference_sum(map, x, S::cst(step))?;
    let fine = second_difference_sum(map, x, S::cst(step / 2.0))?;
    let third = S::cst(1.0 / 3.0);
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(&f, &c)| (S::cst(4.0) * f - c) * third)
        .collect())
}

fn second_difference_sum<S: Scalar, M: SmoothMap<S> + ?Sized>(
    map: &M,
    x: &[S],
    h: S,
) -> Result<Vec<S>, TheoryError> {
    let d = map.dim();
    let center = map.eval(x)?;
    let two = S::cst(2.0);
    let inv_h2 = S::one() / (h * h);
    let mut acc = vec![S::zero(); d];
    let mut probe = x.to_vec();
    for i in 0..d {
        probe[i] = x[i] + h;
        let plus = map.eval(&probe)?;
        probe[i] = x[i] - h;
        let minus = map.eval(&probe)?;
        probe[i] = x[i];
        for k in 0..d {
            acc[k] += (plus[k] - two * center[k] + minus[k]) * inv_h2;
        }
    }
    Ok(acc)
}

/// Second directional derivative D^2 f (u, u) scaled to A(eps, eps), via a
/// symmetric difference along eps.
pub fn directional_second_difference<S: Scalar, M: SmoothMap<S> + ?Sized>(
    map: &M,
    x: &[S],
    eps: &[S],
    h: f64,
) -> Result<Vec<S>, TheoryError> {
    let norm: S = eps.iter().map(|&e| e * e).sum::<S>().sqrt();
    if norm == S::zero() {
        return Ok(vec![S::zero(); map.dim()]);
    }
    let hs = S::cst(h);
    let plus: Vec<S> = x.iter().zip(eps).map(|(&xi, &e)| xi + hs * e / norm).collect();
    let minus: Vec<S> = x.iter().zip(eps).map(|(&xi, &e)| xi - hs * e / norm).collect();
    let fp = map.eval(&plus)?;
    let fm = map.eval(&minus)?;
    let f0 = map.eval(x)?;
    let two = S::cst(2.0);
    let scale = norm * norm / (hs * hs);
    Ok(fp
        .iter()
        .zip(&fm)
        .zip(&f0)
        .map(|((&p, &m), &c)| (p - two * c + m) * scale)
        .collect())
}

/// Exact affine map A x + b.
#[derive(Debug, Clone)]
pub struct AffineMap<S> {
    matrix: Matrix<S>,
    offset: Vec<S>,
}

impl<S: Scalar> AffineMap<S> {
    pub fn new(matrix: Matrix<S>, offset: Vec<S>) -> Self {
        assert_eq!(matrix.rows(), matrix.cols());
        assert_eq!(matrix.rows(), offset.len());
        Self { matrix, offset }
    }

    pub fn identity_shift(offset: Vec<S>) -> Self {
        let d = offset.len();
        Self::new(Matrix::identity(d), offset)
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.matrix
    }
}

impl<S: Scalar> SmoothMap<S> for AffineMap<S> {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn eval(&self, x: &[S]) -> Result<Vec<S>, TheoryError> {
        let mut y = self.matrix.matvec(x);
        for (v, &b) in y.iter_mut().zip(&self.offset) {
            *v += b;
        }
        Ok(y)
    }

    fn jacobian(&self, _x: &[S]) -> Result<Matrix<S>, TheoryError> {
        Ok(self.matrix.clone())
    }

    fn laplacian(&self, _x: &[S]) -> Result<Vec<S>, TheoryError> {
        Ok(vec![S::zero(); self.dim()])
    }
}

/// Elementwise polynomial fixture f(v)_i = sum_j coeffs[j] * v_i^j; the
/// cubic and quartic test maps are instances. Derivatives deliberately go
/// through the generic finite-difference path.
#[derive(Debug, Clone)]
pub struct ElementwisePolynomial {
    dim: usize,
    coeffs: Vec<f64>,
}

impl ElementwisePolynomial {
    pub fn new(dim: usize, coeffs: Vec<f64>) -> Self {
        Self { dim, coeffs }
    }

    /// v + c v^p for the identity-plus-power fixtures.
    pub fn identity_plus_power(dim: usize, c: f64, power: usize) -> Self {
        let mut coeffs = vec![0.0; power + 1];
        coeffs[1] = 1.0;
        coeffs[power] += c;
        Self::new(dim, coeffs)
    }
}

impl<S: Scalar> SmoothMap<S> for ElementwisePolynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[S]) -> Result<Vec<S>, TheoryError> {
        if x.len() != self.dim {
            return Err(TheoryError::Dim { got: x.len(), want: self.dim });
        }
        Ok(x.iter()
            .map(|&v| {
                // Horner evaluation.
                let mut acc = S::zero();
                for &c in self.coeffs.iter().rev() {
                    acc = acc * v + S::cst(c);
                }
                acc
            })
            .collect())
    }
}

/// A trained or random network seen as a smooth map.
pub struct NetworkMap<'a, S> {
    net: &'a Network,
    params: &'a ParamVector<S>,
    jacobian_cap: usize,
}

impl<'a, S: Scalar> NetworkMap<'a, S> {
    pub fn new(net: &'a Network, params: &'a ParamVector<S>, jacobian_cap: usize) -> Self {
        Self { net, params, jacobian_cap }
    }
}

impl<S: Scalar> SmoothMap<S> for NetworkMap<'_, S> {
    fn dim(&self) -> usize {
        self.net.dim()
    }

    fn eval(&self, x: &[S]) -> Result<Vec<S>, TheoryError> {
        Ok(self.net.forward(self.params, x)?)
    }

    /// Exact layerwise Jacobian rather than finite differences.
    fn jacobian(&self, x: &[S]) -> Result<Matrix<S>, TheoryError> {
        Ok(net_jacobian(self.net, self.params, x, self.jacobian_cap)?)
    }

    fn laplacian(&self, x: &[S]) -> Result<Vec<S>, TheoryError> {
        Ok(net_laplacian(self.net, self.params, x, FD_LAPLACIAN_STEP, self.jacobian_cap)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, Seeder};

    #[test]
    fn square_map_has_constant_laplacian_two() {
        // f(v) = v * v elementwise: second derivative 2 in each coordinate.
        let map = ElementwisePolynomial::new(3, vec![0.0, 0.0, 1.0]);
        let lap = SmoothMap::<f64>::laplacian(&map, &[0.3, -1.2, 0.7]).unwrap();
        for v in lap {
            assert!((v - 2.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn fd_jacobian_of_square_map_is_diag_two_x() {
        let map = ElementwisePolynomial::new(2, vec![0.0, 0.0, 1.0]);
        let x = [0.4, -0.9];
        let j = SmoothMap::<f64>::jacobian(&map, &x).unwrap();
        assert!((j[(0, 0)] - 0.8).abs() < 1e-9);
        assert!((j[(1, 1)] + 1.8).abs() < 1e-9);
        assert!(j[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn affine_map_reports_exact_derivatives() {
        let mut m = Matrix::<f64>::identity(2);
        m[(0, 1)] = 0.5;
        let map = AffineMap::new(m.clone(), vec![0.1, -0.2]);
        let j = map.jacobian(&[1.0, 2.0]).unwrap();
        assert_eq!(j, m);
        assert_eq!(map.laplacian(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(map.eval(&[1.0, 2.0]).unwrap(), vec![1.0 + 1.0 + 0.1, 2.0 - 0.2]);
    }

    #[test]
    fn directional_second_difference_matches_quadratic() {
        // For f(v) = v * v elementwise, A(eps, eps)_k = 2 eps_k^2.
        let map = ElementwisePolynomial::new(2, vec![0.0, 0.0, 1.0]);
        let x = [0.2, 0.5];
        let eps = [0.3, -0.1];
        let a = directional_second_difference::<f64, _>(&map, &x, &eps, 1e-4).unwrap();
        assert!((a[0] - 2.0 * 0.09).abs() < 1e-6);
        assert!((a[1] - 2.0 * 0.01).abs() < 1e-6);
    }

    #[test]
    fn network_map_agrees_with_direct_forward() {
        use crate::net::{Activation, NetworkConfig};
        let net = Network::new(NetworkConfig::dense_autoencoder(
            (1, 4, 1),
            &[3],
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap();
        let params = net.init_params(&mut Seeder::new(2).stream("init"));
        let map = NetworkMap::new(&net, &params, 128);
        let mut rng = Seeder::new(3).stream("x");
        let x = normal_vec::<f64, _>(&mut rng, 4, 0.5);
        assert_eq!(map.eval(&x).unwrap(), net.forward(&params, &x).unwrap());
        // Exact vs finite-difference Jacobians agree closely.
        let exact = map.jacobian(&x).unwrap();
        let fd = fd_jacobian(&map, &x, 1e-5).unwrap();
        for k in 0..4 {
            for i in 0..4 {
                assert!((exact[(k, i)] - fd[(k, i)]).abs() < 1e-8);
            }
        }
    }
}
