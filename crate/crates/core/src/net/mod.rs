//! A small fully-differentiable reconstruction network.
//!
//! Architectures are ordered lists of dense, convolution, and activation
//! layers whose overall input and output dimensionality must match. All
//! derivatives used anywhere in the crate are hand-derived reverse-mode
//! passes over the layer tape; there is no autodiff framework underneath.

mod adam;
mod checkpoint;
mod jacobian;
mod losses;
mod params;
mod train;

pub use adam::{adam_step, TrainState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use jacobian::{jacobian, laplacian, JACOBIAN_DIM_CAP};
pub use losses::{batch_gradient, loss_dae, loss_fae, loss_weighted, residual, GradSample, LossKind};
pub use params::ParamVector;
pub use train::{train, Checkpoint, TrainLogRow, TrainLoss, TrainOutcome, TrainSchedule};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    Arch(String),
    #[error("non-finite value in output of layer {layer}")]
    NonFinite { layer: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("parameter vector length {got}, architecture expects {want}")]
    ParamLength { got: usize, want: usize },
    #[error("input length {got}, architecture expects {want}")]
    InputLength { got: usize, want: usize },
    #[error("dimension {dim} exceeds Jacobian capacity {cap}")]
    JacobianCap { dim: usize, cap: usize },
    #[error("training loss became non-finite at step {step}")]
    Diverged { step: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("no training images")]
    NoTrainingData,
    #[error(transparent)]
    Corruption(#[from] crate::corruption::CorruptionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => z.max(S::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => S::one() / (S::one() + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn derivative_from_output<S: Scalar>(self, out: S) -> S {
        match self {
            Activation::Relu => {
                if out > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => S::one() - out * out,
            Activation::Sigmoid => out * (S::one() - out),
            Activation::Identity => S::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { out: usize },
    Conv { out_channels: usize, kernel: usize, stride: usize, pad: usize },
    Activation(Activation),
}

/// Architecture description: input shape plus the ordered layer list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    /// (height, width, channels) of the input tensor.
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
}

impl NetworkConfig {
    /// Dense bottleneck autoencoder with the given hidden widths; the
    /// output layer restores the input dimension.
    pub fn dense_autoencoder(
        input: (usize, usize, usize),
        hidden: &[usize],
        hidden_act: Activation,
        final_act: Activation,
    ) -> Self {
        let d = input.0 * input.1 * input.2;
        let mut layers = Vec::new();
        for &width in hidden {
            layers.push(LayerSpec::Dense { out: width });
            layers.push(LayerSpec::Activation(hidden_act));
        }
        layers.push(LayerSpec::Dense { out: d });
        layers.push(LayerSpec::Activation(final_act));
        Self { input, layers }
    }

    /// Stride-1, same-padded convolution stack ending back at the input
    /// channel count.
    pub fn conv_stack(
        input: (usize, usize, usize),
        hidden_channels: &[usize],
        kernel: usize,
        hidden_act: Activation,
        final_act: Activation,
    ) -> Self {
        let pad = (kernel - 1) / 2;
        let mut layers = Vec::new();
        for &ch in hidden_channels {
            layers.push(LayerSpec::Conv { out_channels: ch, kernel, stride: 1, pad });
            layers.push(LayerSpec::Activation(hidden_act));
        }
        layers.push(LayerSpec::Conv { out_channels: input.2, kernel, stride: 1, pad });
        layers.push(LayerSpec::Activation(final_act));
        Self { input, layers }
    }
}

/// Per-parametric-layer slice of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlice {
    pub layer: usize,
    pub weight_offset: usize,
    pub weight_len: usize,
    pub bias_offset: usize,
    pub bias_len: usize,
}

/// A validated architecture with precomputed shape flow and parameter
/// layout. Construction fails unless output dimension equals input
/// dimension and every intermediate size is at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    shapes: Vec<(usize, usize, usize)>,
    layout: Vec<ParamSlice>,
    param_len: usize,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self, NetError> {
        let (h, w, c) = config.input;
        if h == 0 || w == 0 || !(c == 1 || c == 3) {
            return Err(NetError::Arch(format!("bad input shape {h}x{w}x{c}")));
        }
        if config.layers.is_empty() {
            return Err(NetError::Arch("no layers".into()));
        }
        let mut shapes = vec![config.input];
        let mut layout = Vec::new();
        let mut offset = 0usize;
        for (li, layer) in config.layers.iter().enumerate() {
            let (ih, iw, ic) = *shapes.last().expect("nonempty");
            let out_shape = match *layer {
                LayerSpec::Dense { out } => {
                    if out == 0 {
                        return Err(NetError::Arch(format!("layer {li}: dense width 0")));
                    }
                    let d_in = ih * iw * ic;
                    layout.push(ParamSlice {
                        layer: li,
                        weight_offset: offset,
                        weight_len: out * d_in,
                        bias_offset: offset + out * d_in,
                        bias_len: out,
                    });
                    offset += out * d_in + out;
                    (1, 1, out)
                }
                LayerSpec::Conv { out_channels, kernel, stride, pad } => {
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return Err(NetError::Arch(format!("layer {li}: conv sizes must be positive")));
                    }
                    if ih + 2 * pad < kernel || iw + 2 * pad < kernel {
                        return Err(NetError::Arch(format!("layer {li}: kernel larger than padded input")));
                    }
                    if (ih + 2 * pad - kernel) % stride != 0 || (iw + 2 * pad - kernel) % stride != 0 {
                        return Err(NetError::Arch(format!("layer {li}: stride does not tile input")));
                    }
                    let oh = (ih + 2 * pad - kernel) / stride + 1;
                    let ow = (iw + 2 * pad - kernel) / stride + 1;
                    let wlen = ic * kernel * kernel * out_channels;
                    layout.push(ParamSlice {
                        layer: li,
                        weight_offset: offset,
                        weight_len: wlen,
                        bias_offset: offset + wlen,
                        bias_len: out_channels,
                    });
                    offset += wlen + out_channels;
                    (oh, ow, out_channels)
                }
                LayerSpec::Activation(_) => (ih, iw, ic),
            };
            shapes.push(out_shape);
        }
        let d_in = h * w * c;
        let (oh, ow, oc) = *shapes.last().expect("nonempty");
        if oh * ow * oc != d_in {
            return Err(NetError::Arch(format!(
                "output dimension {} != input dimension {d_in}",
                oh * ow * oc
            )));
        }
        Ok(Self { config, shapes, layout, param_len: offset })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Flat input/output dimensionality d = h*w*c.
    pub fn dim(&self) -> usize {
        let (h, w, c) = self.config.input;
        h * w * c
    }

    pub fn param_len(&self) -> usize {
        self.param_len
    }

    /// Offsets table mapping parametric layers to weight/bias slices.
    pub fn layout(&self) -> &[ParamSlice] {
        &self.layout
    }

    pub fn shapes(&self) -> &[(usize, usize, usize)] {
        &self.shapes
    }

    fn check_params<S: Scalar>(&self, params: &ParamVector<S>) -> Result<(), NetError> {
        if params.len() != self.param_len {
            return Err(NetError::ParamLength { got: params.len(), want: self.param_len });
        }
        Ok(())
    }

    fn check_input<S: Scalar>(&self, x: &[S]) -> Result<(), NetError> {
        if x.len() != self.dim() {
            return Err(NetError::InputLength { got: x.len(), want: self.dim() });
        }
        Ok(())
    }

    /// Deterministic layer-by-layer evaluation.
    pub fn forward<S: Scalar>(&self, params: &ParamVector<S>, x: &[S]) -> Result<Vec<S>, NetError> {
        let tape = self.forward_tape(params, x)?;
        Ok(tape.into_iter().last().expect("tape nonempty"))
    }

    /// Forward pass keeping every layer output; `tape[0]` is the input and
    /// `tape[i]` the output of layer i-1.
    pub(crate) fn forward_tape<S: Scalar>(
        &self,
        params: &ParamVector<S>,
        x: &[S],
    ) -> Result<Vec<Vec<S>>, NetError> {
        self.check_params(params)?;
        self.check_input(x)?;
        let mut tape = Vec::with_capacity(self.config.layers.len() + 1);
        tape.push(x.to_vec());
        let mut slice_iter = self.layout.iter();
        for (li, layer) in self.config.layers.iter().enumerate() {
            let input = tape.last().expect("nonempty");
            let out = match *layer {
                LayerSpec::Dense { out } => {
                    let ps = slice_iter.next().expect("layout in sync");
                    dense_forward(params.values(), ps, input, out)
                }
                LayerSpec::Conv { out_channels, kernel, stride, pad } => {
                    let ps = slice_iter.next().expect("layout in sync");
                    let (ih, iw, ic) = self.shapes[li];
                    let (oh, ow, _) = self.shapes[li + 1];
                    conv_forward(
                        params.values(), ps, input,
                        ConvDims { ih, iw, ic, oh, ow, oc: out_channels, kernel, stride, pad },
                        true,
                    )
                }
                LayerSpec::Activation(act) => input.iter().map(|&z| act.apply(z)).collect(),
            };
            if out.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFinite { layer: li });
            }
            tape.push(out);
        }
        Ok(tape)
    }

    /// The linear action of a parametric layer (forward without bias), used
    /// to push Jacobian columns through the network.
    pub(crate) fn apply_linear<S: Scalar>(
        &self,
        params: &ParamVector<S>,
        layer_index: usize,
        col: &[S],
    ) -> Vec<S> {
        let layer = self.config.layers[layer_index];
        let ps = *self
            .layout
            .iter()
            .find(|p| p.layer == layer_index)
            .expect("parametric layer");
        match layer {
            LayerSpec::Dense { out } => dense_linear(params.values(), ps, col, out),
            LayerSpec::Conv { out_channels, kernel, stride, pad } => {
                let (ih, iw, ic) = self.shapes[layer_index];
                let (oh, ow, _) = self.shapes[layer_index + 1];
                conv_forward(
                    params.values(), &ps, col,
                    ConvDims { ih, iw, ic, oh, ow, oc: out_channels, kernel, stride, pad },
                    false,
                )
            }
            LayerSpec::Activation(_) => unreachable!("apply_linear on activation layer"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub ih: usize,
    pub iw: usize,
    pub ic: usize,
    pub oh: usize,
    pub ow: usize,
    pub oc: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

fn dense_forward<S: Scalar>(params: &[S], ps: &ParamSlice, x: &[S], out: usize) -> Vec<S> {
    let d_in = x.len();
    let w = &params[ps.weight_offset..ps.weight_offset + ps.weight_len];
    let b = &params[ps.bias_offset..ps.bias_offset + ps.bias_len];
    let mut y = Vec::with_capacity(out);
    for o in 0..out {
        let row = &w[o * d_in..(o + 1) * d_in];
        let mut acc = b[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += *wi * *xi;
        }
        y.push(acc);
    }
    y
}

fn dense_linear<S: Scalar>(params: &[S], ps: ParamSlice, x: &[S], out: usize) -> Vec<S> {
    let d_in = x.len();
    let w = &params[ps.weight_offset..ps.weight_offset + ps.weight_len];
    let mut y = Vec::with_capacity(out);
    for o in 0..out {
        let row = &w[o * d_in..(o + 1) * d_in];
        let mut acc = S::zero();
        for (wi, xi) in row.iter().zip(x) {
            acc += *wi * *xi;
        }
        y.push(acc);
    }
    y
}

/// Range of output positions whose receptive field stays inside the input
/// along one axis: 0 <= o*stride + k - pad < extent.
#[inline]
fn valid_out_range(k: usize, pad: usize, stride: usize, extent: usize, out_extent: usize) -> (usize, usize) {
    let lo = (pad + stride - 1).saturating_sub(k) / stride;
    let hi = if extent + pad > k { ((extent + pad - k - 1) / stride + 1).min(out_extent) } else { 0 };
    (lo.min(hi), hi)
}

/// Channel-interleaved convolution; weights are laid out [ic][ky][kx][oc]
/// so the innermost accumulation runs over contiguous output channels, and
/// the loop over output columns is hoisted outside all bounds handling.
pub(crate) fn conv_forward<S: Scalar>(
    params: &[S],
    ps: &ParamSlice,
    x: &[S],
    dims: ConvDims,
    with_bias: bool,
) -> Vec<S> {
    let ConvDims { ih, iw, ic, oh, ow, oc, kernel, stride, pad } = dims;
    let w = &params[ps.weight_offset..ps.weight_offset + ps.weight_len];
    let b = &params[ps.bias_offset..ps.bias_offset + ps.bias_len];
    let mut out = if with_bias {
        let mut v = Vec::with_capacity(oh * ow * oc);
        for _ in 0..oh * ow {
            v.extend_from_slice(b);
        }
        v
    } else {
        vec![S::zero(); oh * ow * oc]
    };
    for oy in 0..oh {
        for ky in 0..kernel {
            let iy = (oy * stride + ky) as isize - pad as isize;
            if iy < 0 || iy as usize >= ih {
                continue;
            }
            let iy = iy as usize;
            for kx in 0..kernel {
                let (lo, hi) = valid_out_range(kx, pad, stride, iw, ow);
                if lo >= hi {
                    continue;
                }
                let out_row = &mut out[(oy * ow + lo) * oc..(oy * ow + hi) * oc];
                for ci in 0..ic {
                    let w_base = ((ci * kernel + ky) * kernel + kx) * oc;
                    let wrow = &w[w_base..w_base + oc];
                    let x_base = (iy * iw + lo * stride + kx - pad) * ic + ci;
                    for (j, out_chunk) in out_row.chunks_exact_mut(oc).enumerate() {
                        let xv = x[x_base + j * stride * ic];
                        for (o, wi) in out_chunk.iter_mut().zip(wrow) {
                            *o += xv * *wi;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Reverse pass of one convolution: accumulates weight/bias gradients and
/// returns the gradient with respect to the layer input.
pub(crate) fn conv_backward<S: Scalar>(
    params: &[S],
    ps: &ParamSlice,
    x: &[S],
    g_out: &[S],
    dims: ConvDims,
    grad: &mut [S],
) -> Vec<S> {
    let ConvDims { ih, iw, ic, oh, ow, oc, kernel, stride, pad } = dims;
    let w = &params[ps.weight_offset..ps.weight_offset + ps.weight_len];
    let mut g_in = vec![S::zero(); ih * iw * ic];
    {
        let db = &mut grad[ps.bias_offset..ps.bias_offset + ps.bias_len];
        for p in 0..oh * ow {
            let row = &g_out[p * oc..(p + 1) * oc];
            for (d, g) in db.iter_mut().zip(row) {
                *d += *g;
            }
        }
    }
    for oy in 0..oh {
        for ky in 0..kernel {
            let iy = (oy * stride + ky) as isize - pad as isize;
            if iy < 0 || iy as usize >= ih {
                continue;
            }
            let iy = iy as usize;
            for kx in 0..kernel {
                let (lo, hi) = valid_out_range(kx, pad, stride, iw, ow);
                if lo >= hi {
                    continue;
                }
                let gout_row = &g_out[(oy * ow + lo) * oc..(oy * ow + hi) * oc];
                for ci in 0..ic {
                    let w_base = ((ci * kernel + ky) * kernel + kx) * oc;
                    let x_base = (iy * iw + lo * stride + kx - pad) * ic + ci;
                    let dwrow = &mut grad[ps.weight_offset + w_base..ps.weight_offset + w_base + oc];
                    let wrow = &w[w_base..w_base + oc];
                    for (j, gout_chunk) in gout_row.chunks_exact(oc).enumerate() {
                        let xi = x_base + j * stride * ic;
                        let xv = x[xi];
                        for (dw, g) in dwrow.iter_mut().zip(gout_chunk) {
                            *dw += xv * *g;
                        }
                        let mut acc = S::zero();
                        for (wi, g) in wrow.iter().zip(gout_chunk) {
                            acc += *wi * *g;
                        }
                        g_in[xi] += acc;
                    }
                }
            }
        }
    }
    g_in
}

/// Reverse pass over the whole tape: seeds with dL/d(output) and returns
/// dL/d(theta), accumulated into `grad`.
pub(crate) fn backprop<S: Scalar>(
    net: &Network,
    params: &ParamVector<S>,
    tape: &[Vec<S>],
    mut g: Vec<S>,
    grad: &mut [S],
) {
    debug_assert_eq!(grad.len(), net.param_len);
    let mut slices: Vec<Option<ParamSlice>> = vec![None; net.config.layers.len()];
    for ps in &net.layout {
        slices[ps.layer] = Some(*ps);
    }
    for li in (0..net.config.layers.len()).rev() {
        let input = &tape[li];
        let output = &tape[li + 1];
        match net.config.layers[li] {
            LayerSpec::Activation(act) => {
                for (gi, &o) in g.iter_mut().zip(output) {
                    *gi *= act.derivative_from_output(o);
                }
            }
            LayerSpec::Dense { out } => {
                let ps = slices[li].expect("layout in sync");
                let d_in = input.len();
                let w = params.values();
                let mut g_in = vec![S::zero(); d_in];
                for o in 0..out {
                    let go = g[o];
                    let row = &w[ps.weight_offset + o * d_in..ps.weight_offset + (o + 1) * d_in];
                    let drow = &mut grad[ps.weight_offset + o * d_in..ps.weight_offset + (o + 1) * d_in];
                    for i in 0..d_in {
                        drow[i] += go * input[i];
                        g_in[i] += go * row[i];
                    }
                    grad[ps.bias_offset + o] += go;
                }
                g = g_in;
            }
            LayerSpec::Conv { out_channels, kernel, stride, pad } => {
                let ps = slices[li].expect("layout in sync");
                let (ih, iw, ic) = net.shapes[li];
                let (oh, ow, _) = net.shapes[li + 1];
                g = conv_backward(
                    params.values(), &ps, input, &g,
                    ConvDims { ih, iw, ic, oh, ow, oc: out_channels, kernel, stride, pad },
                    grad,
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    #[test]
    fn identity_dense_network_is_identity() {
        let cfg = NetworkConfig {
            input: (1, 1, 3),
            layers: vec![LayerSpec::Dense { out: 3 }, LayerSpec::Activation(Activation::Identity)],
        };
        let net = Network::new(cfg).unwrap();
        let mut params = ParamVector::zeros(net.param_len());
        // W = I, b = 0.
        for i in 0..3 {
            params.values_mut()[i * 3 + i] = 1.0;
        }
        let x = [0.2, -0.5, 0.9];
        let y = net.forward(&params, &x).unwrap();
        assert_eq!(y, x.to_vec());
    }

    #[test]
    fn zero_weights_sigmoid_bias_evaluates_logistic() {
        let cfg = NetworkConfig {
            input: (1, 2, 1),
            layers: vec![LayerSpec::Dense { out: 2 }, LayerSpec::Activation(Activation::Sigmoid)],
        };
        let net = Network::new(cfg).unwrap();
        let mut params = ParamVector::zeros(net.param_len());
        params.values_mut()[4] = 0.3; // biases
        params.values_mut()[5] = 0.3;
        let y = net.forward(&params, &[0.1, 0.9]).unwrap();
        let expected = 1.0 / (1.0 + (-0.3f64).exp());
        assert!((expected - 0.574_442_516_811_659).abs() < 1e-12);
        for v in y {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let net = Network::new(NetworkConfig::dense_autoencoder(
            (2, 2, 1),
            &[3],
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap();
        let params = net.init_params::<f64>(&mut Seeder::new(5).stream("init"));
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(net.forward(&params, &x).unwrap(), net.forward(&params, &x).unwrap());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cfg = NetworkConfig {
            input: (1, 1, 3),
            layers: vec![LayerSpec::Dense { out: 2 }],
        };
        assert!(matches!(Network::new(cfg), Err(NetError::Arch(_))));
    }

    #[test]
    fn conv_same_padding_keeps_shape_and_matches_naive() {
        let cfg = NetworkConfig::conv_stack((4, 5, 1), &[2], 3, Activation::Identity, Activation::Identity);
        let net = Network::new(cfg).unwrap();
        let mut rng = Seeder::new(8).stream("init");
        let params = net.init_params::<f64>(&mut rng);
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = net.forward(&params, &x).unwrap();
        assert_eq!(y.len(), 20);

        // Naive single-conv oracle for the first layer.
        let ps = net.layout()[0];
        let w = &params.values()[ps.weight_offset..ps.weight_offset + ps.weight_len];
        let b = &params.values()[ps.bias_offset..ps.bias_offset + ps.bias_len];
        let tape = net.forward_tape(&params, &x).unwrap();
        for oy in 0..4i32 {
            for ox in 0..5i32 {
                for oc in 0..2usize {
                    let mut acc = b[oc];
                    for ky in 0..3i32 {
                        for kx in 0..3i32 {
                            let iy = oy + ky - 1;
                            let ix = ox + kx - 1;
                            if iy < 0 || iy >= 4 || ix < 0 || ix >= 5 {
                                continue;
                            }
                            let xv = x[(iy * 5 + ix) as usize];
                            acc += xv * w[(((ky * 3 + kx) as usize) * 2) + oc];
                        }
                    }
                    let got = tape[1][(oy * 5 + ox) as usize * 2 + oc];
                    assert!((got - acc).abs() < 1e-12, "conv mismatch at ({oy},{ox},{oc})");
                }
            }
        }
    }

    #[test]
    fn non_finite_output_reports_layer() {
        let cfg = NetworkConfig {
            input: (1, 1, 1),
            layers: vec![LayerSpec::Dense { out: 1 }, LayerSpec::Activation(Activation::Identity)],
        };
        let net = Network::new(cfg).unwrap();
        let mut params = ParamVector::zeros(net.param_len());
        params.values_mut()[0] = f64::MAX;
        params.values_mut()[1] = f64::MAX;
        let err = net.forward(&params, &[2.0]).unwrap_err();
        assert!(matches!(err, NetError::NonFinite { layer: 0 }));
    }
}
