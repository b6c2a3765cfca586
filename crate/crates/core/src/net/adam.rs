//! Adam optimizer with bias correction.

use super::{NetError, ParamVector};
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state; moments have the same length as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<S> {
    pub params: ParamVector<S>,
    pub first_moment: Vec<S>,
    pub second_moment: Vec<S>,
    pub step: u64,
    pub learning_rate: S,
    pub seed: u64,
}

impl<S: Scalar> TrainState<S> {
    pub fn new(params: ParamVector<S>, learning_rate: S, seed: u64) -> Self {
        let n = params.len();
        Self {
            params,
            first_moment: vec![S::zero(); n],
            second_moment: vec![S::zero(); n],
            step: 0,
            learning_rate,
            seed,
        }
    }
}

/// One Adam update; pure, the input state is left untouched.
pub fn adam_step<S: Scalar>(state: &TrainState<S>, grad: &[S]) -> Result<TrainState<S>, NetError> {
    if grad.len() != state.params.len() {
        return Err(NetError::ParamLength { got: grad.len(), want: state.params.len() });
    }
    let mut next = state.clone();
    adam_step_in_place(&mut next, grad)?;
    Ok(next)
}

pub(crate) fn adam_step_in_place<S: Scalar>(
    state: &mut TrainState<S>,
    grad: &[S],
) -> Result<(), NetError> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(NetError::NonFiniteGradient);
    }
    let beta1 = S::cst(ADAM_BETA1);
    let beta2 = S::cst(ADAM_BETA2);
    let eps = S::cst(ADAM_EPS);
    state.step += 1;
    let t = state.step as i32;
    let corr1 = S::one() - beta1.powi(t);
    let corr2 = S::one() - beta2.powi(t);
    let lr = state.learning_rate;
    let params = state.params.values_mut();
    for i in 0..grad.len() {
        let g = grad[i];
        let m = beta1 * state.first_moment[i] + (S::one() - beta1) * g;
        let v = beta2 * state.second_moment[i] + (S::one() - beta2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / corr1;
        let v_hat = v / corr2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
