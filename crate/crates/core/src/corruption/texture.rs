//! Texture fills for occluded regions.
//!
//! The default is procedural synthesis (multi-octave value noise, random
//! stripes, random two-level blotches) so no external data is needed; a
//! directory of user-supplied PPM/PGM images can be used instead.

use std::path::{Path, PathBuf};

use rand::Rng;

use super::{CorruptionError, TextureSource};
use crate::image::Image;
use crate::io::pnm;
use crate::rng::{uniform, Stream};
use crate::scalar::Scalar;

/// Parameter family for procedural textures. Disjoint families (different
/// scales, different rng substreams) give provably non-overlapping texture
/// draws between training and held-out evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureFamily {
    /// Base lattice spacings, in pixels, one of which is drawn per texture.
    pub scales: Vec<usize>,
    /// Octave amplitudes for value noise; all-zero yields constant mid-gray.
    pub octave_amplitudes: Vec<f64>,
}

impl Default for TextureFamily {
    fn default() -> Self {
        Self { scales: vec![4, 8], octave_amplitudes: vec![0.7, 0.35, 0.18] }
    }
}

/// Draws one texture image in [0, 1].
pub fn sample_texture<S: Scalar>(
    rng: &mut Stream,
    h: usize,
    w: usize,
    channels: usize,
    source: &TextureSource,
) -> Result<Image<S>, CorruptionError> {
    match source {
        TextureSource::Procedural(family) => Ok(procedural(rng, h, w, channels, family)),
        TextureSource::Directory(dir) => from_directory(rng, h, w, channels, dir),
    }
}

fn procedural<S: Scalar>(
    rng: &mut Stream,
    h: usize,
    w: usize,
    channels: usize,
    family: &TextureFamily,
) -> Image<S> {
    let scale = if family.scales.is_empty() {
        8
    } else {
        family.scales[rng.random_range(0..family.scales.len())]
    };
    let field = match rng.random_range(0..3u32) {
        0 => value_noise(rng, h, w, scale, &family.octave_amplitudes),
        1 => stripes(rng, h, w, scale as f64),
        _ => blotches(rng, h, w, scale, &family.octave_amplitudes),
    };
    tint(rng, h, w, channels, &field)
}

/// Multi-octave value noise around mid-gray; zero amplitudes give a
/// constant 0.5 image.
pub fn value_noise(rng: &mut Stream, h: usize, w: usize, base_scale: usize, amplitudes: &[f64]) -> Vec<f64> {
    let mut field = vec![0.5f64; h * w];
    let mut scale = base_scale.max(1);
    for &amp in amplitudes {
        let layer = noise_layer(rng, h, w, scale);
        if amp != 0.0 {
            for (f, n) in field.iter_mut().zip(&layer) {
                *f += amp * (n - 0.5);
            }
        }
        scale = (scale / 2).max(1);
    }
    for f in field.iter_mut() {
        *f = f.clamp(0.0, 1.0);
    }
    field
}

/// One bilinear-interpolated random lattice at the given spacing.
fn noise_layer(rng: &mut Stream, h: usize, w: usize, scale: usize) -> Vec<f64> {
    let gh = h / scale + 2;
    let gw = w / scale + 2;
    let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let fy = y as f64 / scale as f64;
            let fx = x as f64 / scale as f64;
            let y0 = fy.floor() as usize;
            let x0 = fx.floor() as usize;
            let ty = fy - y0 as f64;
            let tx = fx - x0 as f64;
            let v00 = lattice[y0 * gw + x0];
            let v01 = lattice[y0 * gw + x0 + 1];
            let v10 = lattice[(y0 + 1) * gw + x0];
            let v11 = lattice[(y0 + 1) * gw + x0 + 1];
            let top = v00 + (v01 - v00) * tx;
            let bot = v10 + (v11 - v10) * tx;
            out.push(top + (bot - top) * ty);
        }
    }
    out
}

fn stripes(rng: &mut Stream, h: usize, w: usize, period_hint: f64) -> Vec<f64> {
    let period = uniform(rng, 0.75, 1.5) * period_hint.max(2.0);
    let theta = uniform(rng, 0.0, std::f64::consts::PI);
    let phase = uniform(rng, 0.0, std::f64::consts::TAU);
    let amp = uniform(rng, 0.15, 0.45);
    let (sin, cos) = theta.sin_cos();
    let freq = std::f64::consts::TAU / period;
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let u = cos * x as f64 + sin * y as f64;
            out.push((0.5 + amp * (freq * u + phase).sin()).clamp(0.0, 1.0));
        }
    }
    out
}

/// Two-level threshold of a noise field: irregular patches of two grays.
fn blotches(rng: &mut Stream, h: usize, w: usize, scale: usize, amplitudes: &[f64]) -> Vec<f64> {
    let lo = uniform(rng, 0.0, 0.45);
    let hi = uniform(rng, 0.55, 1.0);
    let threshold = uniform(rng, 0.35, 0.65);
    value_noise(rng, h, w, scale, amplitudes)
        .into_iter()
        .map(|v| if v > threshold { hi } else { lo })
        .collect()
}

/// Expands a scalar field to the requested channel count; color targets get
/// a random per-channel tint so fills are not always gray.
fn tint<S: Scalar>(rng: &mut Stream, h: usize, w: usize, channels: usize, field: &[f64]) -> Image<S> {
    let tints: Vec<f64> = (0..channels).map(|_| uniform(rng, 0.6, 1.0)).collect();
    let mut data = Vec::with_capacity(h * w * channels);
    for &v in field {
        for &t in &tints {
            data.push(S::cst((v * t).clamp(0.0, 1.0)));
        }
    }
    Image::new(h, w, channels, data).expect("valid shape")
}

fn from_directory<S: Scalar>(
    rng: &mut Stream,
    h: usize,
    w: usize,
    channels: usize,
    dir: &Path,
) -> Result<Image<S>, CorruptionError> {
    let files = list_texture_files(dir)?;
    let src = pnm::read_image::<S>(&files[rng.random_range(0..files.len())])?;
    let oy = rng.random_range(0..src.height());
    let ox = rng.random_range(0..src.width());
    let mut data = Vec::with_capacity(h * w * channels);
    for y in 0..h {
        for x in 0..w {
            let sy = (oy + y) % src.height();
            let sx = (ox + x) % src.width();
            for ch in 0..channels {
                let v = if src.channels() == channels {
                    src.get(sy, sx, ch)
                } else if src.channels() == 1 {
                    src.get(sy, sx, 0)
                } else {
                    // Color source, grayscale target: channel mean.
                    let mut acc = S::zero();
                    for c in 0..src.channels() {
                        acc += src.get(sy, sx, c);
                    }
                    acc / S::cst(src.channels() as f64)
                };
                data.push(v);
            }
        }
    }
    Ok(Image::new(h, w, channels, data).expect("valid shape"))
}

fn list_texture_files(dir: &Path) -> Result<Vec<PathBuf>, CorruptionError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CorruptionError::Config(format!("texture directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|s| s.to_str()),
                Some("ppm") | Some("pgm")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CorruptionError::Config(format!(
            "texture directory {} contains no .ppm/.pgm files",
            dir.display()
        )));
    }
    Ok(files)
}
