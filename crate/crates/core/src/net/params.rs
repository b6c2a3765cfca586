//! Flat parameter storage and initialization.

use rand::Rng;

use super::{LayerSpec, NetError, Network};
use crate::rng::uniform;
use crate::scalar::Scalar;

/// All network weights as one flat vector; slices per layer come from the
/// owning [`Network`]'s layout table. Values must stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<S> {
    values: Vec<S>,
}

impl<S: Scalar> ParamVector<S> {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![S::zero(); len] }
    }

    pub fn from_values(values: Vec<S>) -> Result<Self, NetError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteGradient);
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }
}

impl Network {
    /// Fan-scaled uniform initialization, +-sqrt(6 / (fan_in + fan_out));
    /// biases start at zero.
    pub fn init_params<S: Scalar>(&self, rng: &mut impl Rng) -> ParamVector<S> {
        let mut values = vec![S::zero(); self.param_len()];
        for ps in self.layout() {
            let (fan_in, fan_out) = match self.config().layers[ps.layer] {
                LayerSpec::Dense { out } => (ps.weight_len / out, out),
                LayerSpec::Conv { out_channels, kernel, .. } => {
                    let ic = ps.weight_len / (kernel * kernel * out_channels);
                    (ic * kernel * kernel, out_channels * kernel * kernel)
                }
                LayerSpec::Activation(_) => unreachable!("activation has no params"),
            };
            let bound = S::cst((6.0 / (fan_in + fan_out) as f64).sqrt());
            for v in &mut values[ps.weight_offset..ps.weight_offset + ps.weight_len] {
                *v = uniform(rng, -bound, bound);
            }
        }
        ParamVector { values }
    }
}
