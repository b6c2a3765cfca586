//! Image and mask value types.
//!
//! An [`Image`] is an h x w x c array of real intensities stored row-major
//! and channel-interleaved, nominally in [0, 1]; tensors that have had
//! Gaussian noise added may exceed that range and are only clamped when
//! rendered to files. A [`Mask`] is an h x w array in [0, 1]; it is not
//! binary in general, its value at a pixel is the local corruption opacity.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShapeError {
    #[error("data length {got} does not match {h}x{w}x{c}")]
    DataLength { h: usize, w: usize, c: usize, got: usize },
    #[error("channel count {0} unsupported (expected 1 or 3)")]
    Channels(usize),
    #[error("shape mismatch: {0}x{1}x{2} vs {3}x{4}x{5}")]
    Mismatch(usize, usize, usize, usize, usize, usize),
    #[error("value at index {0} outside [0, 1]")]
    OutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image<S> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<S>,
}

impl<S: Scalar> Image<S> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<S>) -> Result<Self, ShapeError> {
        if channels != 1 && channels != 3 {
            return Err(ShapeError::Channels(channels));
        }
        if data.len() != height * width * channels {
            return Err(ShapeError::DataLength { h: height, w: width, c: channels, got: data.len() });
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: S) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels]).expect("valid shape")
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::constant(height, width, channels, S::zero())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.width + x) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> S {
        self.data[self.idx(y, x, ch)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, v: S) {
        let i = self.idx(y, x, ch);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<(), ShapeError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(ShapeError::Mismatch(
                self.height, self.width, self.channels,
                other.height, other.width, other.channels,
            ))
        }
    }

    /// Per-pixel mean over channels, as a flat h*w vector.
    pub fn channel_mean(&self) -> Vec<S> {
        let c = S::cst(self.channels as f64);
        (0..self.height * self.width)
            .map(|p| {
                let mut acc = S::zero();
                for ch in 0..self.channels {
                    acc += self.data[p * self.channels + ch];
                }
                acc / c
            })
            .collect()
    }

    /// Copy with every value clamped to [0, 1]; used when rendering.
    pub fn clamped(&self) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = v.max(S::zero()).min(S::one());
        }
        out
    }

    pub fn assert_unit_range(&self) -> Result<(), ShapeError> {
        for (i, v) in self.data.iter().enumerate() {
            if *v < S::zero() || *v > S::one() || !v.is_finite() {
                return Err(ShapeError::OutOfRange(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask<S> {
    height: usize,
    width: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mask<S> {
    pub fn new(height: usize, width: usize, data: Vec<S>) -> Result<Self, ShapeError> {
        if data.len() != height * width {
            return Err(ShapeError::DataLength { h: height, w: width, c: 1, got: data.len() });
        }
        for (i, v) in data.iter().enumerate() {
            if *v < S::zero() || *v > S::one() || !v.is_finite() {
                return Err(ShapeError::OutOfRange(i));
            }
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![S::zero(); height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> S {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: S) {
        self.data[y * self.width + x] = v;
    }

    /// Complement mask 1 - M.
    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| S::one() - v).collect(),
        }
    }

    /// Fraction of strictly positive pixels.
    pub fn area_fraction(&self) -> f64 {
        let count = self.data.iter().filter(|&&v| v > S::zero()).count();
        count as f64 / (self.height * self.width) as f64
    }

    pub fn any_positive(&self) -> bool {
        self.data.iter().any(|&v| v > S::zero())
    }

    /// 1 where the mask is positive, 0 elsewhere.
    pub fn binarized(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| if v > S::zero() { S::one() } else { S::zero() }).collect(),
        }
    }

    /// Union of two binary masks (elementwise max in general).
    pub fn union(&self, other: &Self) -> Self {
        assert_eq!((self.height, self.width), (other.height, other.width));
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a.max(b)).collect(),
        }
    }

    /// Scale every value by `alpha` in (0, 1].
    pub fn scaled(&self, alpha: S) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v * alpha).collect(),
        }
    }
}
