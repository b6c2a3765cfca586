//! Procedural corruption synthesis.
//!
//! Produces training pairs (corrupted input, clean target, opacity mask)
//! realizing partial occlusions that vary in shape, texture, and opacity,
//! plus the symmetric Gaussian noise shared by input and target. Anomalies
//! never cover the whole image; the positive-area fraction of every emitted
//! mask lies within configured bounds.

mod shapes;
mod texture;

use std::path::PathBuf;

use rand::Rng;
use thiserror::Error;

pub use shapes::{generate_blob_mask, generate_curve_mask};
pub use texture::{sample_texture, value_noise, TextureFamily};

use crate::image::{Image, Mask, ShapeError};
use crate::io::IoError;
use crate::rng::{normal_vec, uniform, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CorruptionError {
    #[error("mask area fraction {got:.4} outside [{min}, {max}] after {attempts} attempts")]
    AreaBounds { got: f64, min: f64, max: f64, attempts: usize },
    #[error("invalid corruption config: {0}")]
    Config(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Where occlusion fill textures come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TextureSource {
    Procedural(TextureFamily),
    Directory(PathBuf),
}

impl Default for TextureSource {
    fn default() -> Self {
        TextureSource::Procedural(TextureFamily::default())
    }
}

/// Knobs of the corruption generator. Lengths are fractions of min(h, w)
/// so one config works across image sizes; thickness is in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionConfig {
    /// Positive-area fraction bounds for every emitted mask.
    pub area_min: f64,
    pub area_max: f64,
    /// Inclusive range for the number of ellipses per blob mask.
    pub ellipse_count: (usize, usize),
    /// Ellipse semi-axis range as fractions of min(h, w).
    pub ellipse_radius_frac: (f64, f64),
    /// Displacement field grid (g x g nodes).
    pub elastic_grid: usize,
    /// Displacement amplitude as a fraction of min(h, w); 0 disables warping.
    pub elastic_amplitude_frac: f64,
    /// Inclusive range for the number of curves per curve mask.
    pub curve_count: (usize, usize),
    /// Curve path length range as fractions of min(h, w).
    pub curve_length_frac: (f64, f64),
    /// Stroke thickness range in pixels; thin relative to blob diameters.
    pub curve_thickness: (f64, f64),
    /// Opacity range for partially transparent occlusions.
    pub opacity: (f64, f64),
    /// Probability a mask is drawn fully opaque (alpha = 1).
    pub opaque_probability: f64,
    /// Probability of drawing a blob mask / a curve mask for a pair; at
    /// least one is always drawn.
    pub blob_probability: f64,
    pub curve_probability: f64,
    /// Probability a pair carries no corruption at all (pure noise pair).
    pub clean_pair_probability: f64,
    /// Upper bound r of the per-pair noise level sigma ~ Uniform(0, r).
    pub noise_sigma_max: f64,
    /// Attempts before giving up on the area bounds.
    pub retry_budget: usize,
    pub texture: TextureSource,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            area_min: 0.002,
            area_max: 0.30,
            ellipse_count: (1, 3),
            ellipse_radius_frac: (0.05, 0.18),
            elastic_grid: 4,
            elastic_amplitude_frac: 0.06,
            curve_count: (1, 3),
            curve_length_frac: (0.3, 0.9),
            curve_thickness: (1.0, 3.0),
            opacity: (0.3, 0.9),
            opaque_probability: 0.5,
            blob_probability: 0.85,
            curve_probability: 0.5,
            clean_pair_probability: 0.1,
            noise_sigma_max: 0.1,
            retry_budget: 32,
            texture: TextureSource::default(),
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<(), CorruptionError> {
        let fail = |msg: String| Err(CorruptionError::Config(msg));
        if !(self.area_min > 0.0 && self.area_min <= self.area_max && self.area_max < 1.0) {
            return fail(format!("area bounds ({}, {}) must satisfy 0 < min <= max < 1", self.area_min, self.area_max));
        }
        if !(self.opacity.0 > 0.0 && self.opacity.0 <= self.opacity.1 && self.opacity.1 <= 1.0) {
            return fail(format!("opacity range {:?} must lie within (0, 1]", self.opacity));
        }
        if self.noise_sigma_max < 0.0 {
            return fail(format!("noise sigma bound {} must be non-negative", self.noise_sigma_max));
        }
        for (name, p) in [
            ("opaque_probability", self.opaque_probability),
            ("blob_probability", self.blob_probability),
            ("curve_probability", self.curve_probability),
            ("clean_pair_probability", self.clean_pair_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} {p} must lie in [0, 1]"));
            }
        }
        if self.ellipse_count.0 < 1 || self.ellipse_count.0 > self.ellipse_count.1 {
            return fail(format!("ellipse count range {:?} invalid", self.ellipse_count));
        }
        if self.curve_count.0 < 1 || self.curve_count.0 > self.curve_count.1 {
            return fail(format!("curve count range {:?} invalid", self.curve_count));
        }
        if self.retry_budget == 0 {
            return fail("retry budget must be positive".into());
        }
        Ok(())
    }
}

/// One training sample: the same noise realization is added to input and
/// target, so input - target reproduces the structured corruption exactly
/// and vanishes wherever the mask is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair<S> {
    /// Corrupted image plus noise.
    pub input: Image<S>,
    /// Clean image plus the same noise.
    pub target: Image<S>,
    /// Continuous opacity mask; max equals the drawn alpha.
    pub mask: Mask<S>,
    /// Noise standard deviation drawn for this pair.
    pub sigma: S,
}

/// Blends a texture into an image under a binary shape mask with opacity
/// `alpha`: corrupted = (1 - alpha*shape) * x + alpha*shape * texture.
/// Returns the corrupted image and the continuous mask alpha*shape.
pub fn compose_corruption<S: Scalar>(
    x: &Image<S>,
    shape: &Mask<S>,
    texture: &Image<S>,
    alpha: S,
) -> Result<(Image<S>, Mask<S>), CorruptionError> {
    x.check_same_shape(texture)?;
    if shape.height() != x.height() || shape.width() != x.width() {
        return Err(ShapeError::Mismatch(
            x.height(), x.width(), x.channels(),
            shape.height(), shape.width(), 1,
        )
        .into());
    }
    if alpha <= S::zero() || alpha > S::one() {
        return Err(CorruptionError::Config(format!("opacity {alpha} outside (0, 1]")));
    }
    let mut out = x.clone();
    for y in 0..x.height() {
        for xx in 0..x.width() {
            let s = alpha * shape.get(y, xx);
            if s > S::zero() {
                for ch in 0..x.channels() {
                    let v = (S::one() - s) * x.get(y, xx, ch) + s * texture.get(y, xx, ch);
                    out.set(y, xx, ch, v);
                }
            }
        }
    }
    Ok((out, shape.scaled(alpha)))
}

/// Draws shapes, texture, and opacity, composes the corruption, then adds
/// one shared Gaussian noise field to both input and target. With the
/// configured probability the pair is corruption-free, so the model also
/// sees pure-noise identity pairs.
pub fn make_training_pair<S: Scalar>(
    x: &Image<S>,
    cfg: &CorruptionConfig,
    rng: &mut Stream,
) -> Result<TrainingPair<S>, CorruptionError> {
    cfg.validate()?;
    let (corrupted, mask) = if rng.random::<f64>() < cfg.clean_pair_probability {
        (x.clone(), Mask::zeros(x.height(), x.width()))
    } else {
        draw_corruption(x, cfg, rng)?
    };
    let sigma = uniform(rng, S::zero(), S::cst(cfg.noise_sigma_max));
    let noise = normal_vec(rng, x.len(), sigma);
    let mut input = corrupted;
    let mut target = x.clone();
    for (v, &n) in input.data_mut().iter_mut().zip(&noise) {
        *v += n;
    }
    for (v, &n) in target.data_mut().iter_mut().zip(&noise) {
        *v += n;
    }
    Ok(TrainingPair { input, target, mask, sigma })
}

/// Structural corruption without the Gaussian noise component: draws
/// shapes, texture, and opacity, and composes them. Used directly when
/// synthesizing labeled anomalies.
pub fn corrupt_image<S: Scalar>(
    x: &Image<S>,
    cfg: &CorruptionConfig,
    rng: &mut Stream,
) -> Result<(Image<S>, Mask<S>), CorruptionError> {
    cfg.validate()?;
    draw_corruption(x, cfg, rng)
}

/// Corrupted image and mask without noise; the union of drawn shape masks
/// must itself satisfy the area bounds.
fn draw_corruption<S: Scalar>(
    x: &Image<S>,
    cfg: &CorruptionConfig,
    rng: &mut Stream,
) -> Result<(Image<S>, Mask<S>), CorruptionError> {
    let (h, w) = (x.height(), x.width());
    let mut last = 0.0;
    for _ in 0..cfg.retry_budget {
        let want_blob = rng.random::<f64>() < cfg.blob_probability;
        let want_curve = rng.random::<f64>() < cfg.curve_probability;
        let mut shape: Option<Mask<S>> = None;
        if want_blob || !want_curve {
            shape = Some(generate_blob_mask(rng, h, w, cfg)?);
        }
        if want_curve {
            let curve = generate_curve_mask(rng, h, w, cfg)?;
            shape = Some(match shape {
                Some(blob) => blob.union(&curve),
                None => curve,
            });
        }
        let shape = shape.expect("at least one mask drawn");
        last = shape.area_fraction();
        if last < cfg.area_min || last > cfg.area_max {
            continue;
        }
        let alpha = if rng.random::<f64>() < cfg.opaque_probability {
            S::one()
        } else {
            uniform(rng, S::cst(cfg.opacity.0), S::cst(cfg.opacity.1))
        };
        let tex = sample_texture(rng, h, w, x.channels(), &cfg.texture)?;
        return compose_corruption(x, &shape, &tex, alpha);
    }
    Err(CorruptionError::AreaBounds {
        got: last,
        min: cfg.area_min,
        max: cfg.area_max,
        attempts: cfg.retry_budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    fn test_image(h: usize, w: usize, c: usize, seed: u64) -> Image<f64> {
        let mut rng = Seeder::new(seed).stream("img");
        let data = (0..h * w * c).map(|_| rng.random::<f64>()).collect();
        Image::new(h, w, c, data).unwrap()
    }

    #[test]
    fn compose_full_replacement() {
        let x = test_image(8, 8, 3, 0);
        let tex = test_image(8, 8, 3, 1);
        let ones = Mask::new(8, 8, vec![1.0; 64]).unwrap();
        let (xc, m) = compose_corruption(&x, &ones, &tex, 1.0).unwrap();
        assert_eq!(xc, tex);
        assert!(m.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn compose_no_corruption() {
        let x = test_image(8, 8, 1, 0);
        let tex = test_image(8, 8, 1, 1);
        let zeros = Mask::zeros(8, 8);
        let (xc, m) = compose_corruption(&x, &zeros, &tex, 0.7).unwrap();
        assert_eq!(xc, x);
        assert!(!m.any_positive());
    }

    #[test]
    fn compose_convex_blend_single_pixel() {
        let x = Image::zeros(8, 8, 1);
        let tex = Image::constant(8, 8, 1, 1.0f64);
        let mut shape = Mask::zeros(8, 8);
        shape.set(3, 4, 1.0);
        let (xc, m) = compose_corruption(&x, &shape, &tex, 0.5).unwrap();
        for y in 0..8 {
            for xx in 0..8 {
                let expected = if (y, xx) == (3, 4) { 0.5 } else { 0.0 };
                assert_eq!(xc.get(y, xx, 0), expected);
                assert_eq!(m.get(y, xx), expected);
            }
        }
    }

    #[test]
    fn compose_rejects_shape_mismatch() {
        let x = test_image(8, 8, 1, 0);
        let tex = test_image(8, 4, 1, 1);
        let shape = Mask::zeros(8, 8);
        assert!(compose_corruption(&x, &shape, &tex, 1.0).is_err());
    }

    #[test]
    fn pair_difference_vanishes_off_mask_and_matches_corruption() {
        let x = test_image(32, 32, 1, 5);
        let cfg = CorruptionConfig { clean_pair_probability: 0.0, ..Default::default() };
        let mut rng = Seeder::new(12).stream("pair");
        let pair = make_training_pair(&x, &cfg, &mut rng).unwrap();
        for i in 0..x.len() {
            let y = i / 32;
            let xx = i % 32;
            let diff = pair.input.data()[i] - pair.target.data()[i];
            if pair.mask.get(y, xx) == 0.0 {
                assert_eq!(diff, 0.0, "noise must cancel exactly off the mask");
            }
        }
        // The mask/opacity consistency: max(M) equals the drawn alpha <= 1.
        let max = pair.mask.data().iter().cloned().fold(0.0f64, f64::max);
        assert!(max > 0.0 && max <= 1.0);
        let frac = pair.mask.area_fraction();
        assert!(frac >= cfg.area_min && frac <= cfg.area_max);
    }

    #[test]
    fn clean_pair_with_zero_sigma_is_identity() {
        let x = test_image(16, 16, 1, 2);
        let cfg = CorruptionConfig {
            clean_pair_probability: 1.0,
            noise_sigma_max: 0.0,
            ..Default::default()
        };
        let mut rng = Seeder::new(3).stream("pair");
        let pair = make_training_pair(&x, &cfg, &mut rng).unwrap();
        assert_eq!(pair.input, x);
        assert_eq!(pair.target, x);
        assert_eq!(pair.sigma, 0.0);
        assert!(!pair.mask.any_positive());
    }

    #[test]
    fn noise_std_matches_drawn_sigma() {
        let x = Image::constant(64, 64, 3, 0.5f64);
        let cfg = CorruptionConfig { clean_pair_probability: 1.0, noise_sigma_max: 0.2, ..Default::default() };
        let mut rng = Seeder::new(21).stream("pair");
        let pair = make_training_pair(&x, &cfg, &mut rng).unwrap();
        // input - x is exactly the drawn noise field.
        let n = x.len() as f64;
        let mean: f64 = pair.input.data().iter().zip(x.data()).map(|(a, b)| a - b).sum::<f64>() / n;
        let var: f64 = pair
            .input
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let sigma = pair.sigma;
        assert!(sigma > 0.0);
        assert!((var.sqrt() - sigma).abs() / sigma < 0.05, "std {} vs sigma {}", var.sqrt(), sigma);
    }

    #[test]
    fn pair_stream_is_bit_deterministic() {
        let x = test_image(32, 32, 3, 9);
        let cfg = CorruptionConfig::default();
        let run = |seed: u64| {
            let mut rng = Seeder::new(seed).stream("pair");
            (0..5)
                .map(|_| make_training_pair(&x, &cfg, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(77), run(77));
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = CorruptionConfig { area_min: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = CorruptionConfig { opacity: (0.0, 0.5), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = CorruptionConfig { noise_sigma_max: -0.1, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
