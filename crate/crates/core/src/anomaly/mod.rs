//! Test-time detection: difference maps, iterated mean-filter smoothing,
//! image-level scores, and threshold segmentation.

mod delta;

pub use delta::{delta, delta_gms, delta_mse, delta_ssim, DEFAULT_SSIM_WINDOW};

use thiserror::Error;

use crate::image::{Image, Mask, ShapeError};
use crate::net::{NetError, Network, ParamVector};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid smoothing spec: {0}")]
    Spec(String),
    #[error("SSIM window {window} exceeds image extent {h}x{w}")]
    WindowTooLarge { window: usize, h: usize, w: usize },
}

/// Non-negative per-pixel anomaly heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap<S> {
    height: usize,
    width: usize,
    data: Vec<S>,
}

impl<S: Scalar> AnomalyMap<S> {
    pub fn new(height: usize, width: usize, data: Vec<S>) -> Result<Self, AnomalyError> {
        if data.len() != height * width {
            return Err(ShapeError::DataLength { h: height, w: width, c: 1, got: data.len() }.into());
        }
        if data.iter().any(|v| !v.is_finite() || *v < S::zero()) {
            return Err(AnomalyError::Spec("anomaly map values must be finite and non-negative".into()));
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

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> S {
        self.data[y * self.width + x]
    }

    pub fn max_value(&self) -> S {
        self.data.iter().fold(S::zero(), |a, &b| a.max(b))
    }
}

/// Which difference map to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    Mse,
    Ssim,
    Gms,
}

impl std::str::FromStr for DeltaKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mse" => Ok(DeltaKind::Mse),
            "ssim" => Ok(DeltaKind::Ssim),
            "gms" => Ok(DeltaKind::Gms),
            other => Err(format!("unknown delta kind `{other}` (expected mse|ssim|gms)")),
        }
    }
}

/// Repeated k x k mean filtering with reflected boundaries; zero repeats is
/// the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingSpec {
    /// Odd kernel size >= 1.
    pub kernel: usize,
    /// Number of repeated applications.
    pub repeats: usize,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        Self { kernel: 7, repeats: 2 }
    }
}

impl SmoothingSpec {
    pub fn validate(&self) -> Result<(), AnomalyError> {
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(AnomalyError::Spec(format!("kernel size {} must be odd", self.kernel)));
        }
        Ok(())
    }
}

/// Mirror index about the array ends without repeating the edge sample.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// `repeats` applications of the k x k box filter with entries 1/k^2.
pub fn mean_filter<S: Scalar>(map: &AnomalyMap<S>, spec: &SmoothingSpec) -> Result<AnomalyMap<S>, AnomalyError> {
    spec.validate()?;
    let mut current = map.clone();
    for _ in 0..spec.repeats {
        current = box_filter_once(&current, spec.kernel);
    }
    Ok(current)
}

fn box_filter_once<S: Scalar>(map: &AnomalyMap<S>, k: usize) -> AnomalyMap<S> {
    let (h, w) = (map.height, map.width);
    let r = (k / 2) as isize;
    // Horizontal pass: sliding sums of k reflected samples.
    let mut horiz = vec![S::zero(); h * w];
    for y in 0..h {
        let row = &map.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = S::zero();
            for o in -r..=r {
                acc += row[reflect_index(x as isize + o, w)];
            }
            horiz[y * w + x] = acc;
        }
    }
    // Vertical pass plus the single 1/k^2 normalization.
    let inv = S::one() / S::cst((k * k) as f64);
    let mut out = vec![S::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = S::zero();
            for o in -r..=r {
                acc += horiz[reflect_index(y as isize + o, h) * w + x];
            }
            out[y * w + x] = acc * inv;
        }
    }
    AnomalyMap { height: h, width: w, data: out }
}

/// Full detection map: reconstruct, difference, smooth — in that order.
/// The reconstruction is clamped to [0, 1] before differencing, matching
/// how rendered outputs are treated.
pub fn anomap<S: Scalar>(
    x_hat: &Image<S>,
    net: &Network,
    params: &ParamVector<S>,
    kind: DeltaKind,
    spec: &SmoothingSpec,
) -> Result<AnomalyMap<S>, AnomalyError> {
    spec.validate()?;
    let recon = net.forward(params, x_hat.data())?;
    let recon = Image::new(x_hat.height(), x_hat.width(), x_hat.channels(), recon)?.clamped();
    let diff = delta(kind, x_hat, &recon)?;
    mean_filter(&diff, spec)
}

/// How an image-level score is reduced from the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Max,
}

impl std::str::FromStr for Reduction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sum" => Ok(Reduction::Sum),
            "max" => Ok(Reduction::Max),
            other => Err(format!("unknown reduction `{other}` (expected sum|max)")),
        }
    }
}

pub fn image_score<S: Scalar>(map: &AnomalyMap<S>, reduction: Reduction) -> S {
    match reduction {
        Reduction::Sum => map.data.iter().copied().sum(),
        Reduction::Max => map.max_value(),
    }
}

/// Binary segmentation: 1 where the map exceeds the threshold.
pub fn segment<S: Scalar>(map: &AnomalyMap<S>, threshold: S) -> Mask<S> {
    let mut mask = Mask::zeros(map.height, map.width);
    for (i, &v) in map.data.iter().enumerate() {
        if v > threshold {
            mask.data_mut()[i] = S::one();
        }
    }
    mask
}
