//! Difference maps Delta(a, b) in [0, 1], oriented so that higher values
//! mean more anomalous.

use super::{reflect_index, AnomalyError, AnomalyMap, DeltaKind};
use crate::image::Image;
use crate::scalar::Scalar;

pub const DEFAULT_SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 1e-4; // (0.01)^2 at unit dynamic range
const SSIM_C2: f64 = 9e-4; // (0.03)^2
const GMS_C: f64 = 0.0026;

/// Dispatch on the map kind with its standard parameters.
pub fn delta<S: Scalar>(kind: DeltaKind, a: &Image<S>, b: &Image<S>) -> Result<AnomalyMap<S>, AnomalyError> {
    match kind {
        DeltaKind::Mse => delta_mse(a, b),
        DeltaKind::Ssim => delta_ssim(a, b, DEFAULT_SSIM_WINDOW),
        DeltaKind::Gms => delta_gms(a, b),
    }
}

/// Channel-averaged squared difference per pixel.
pub fn delta_mse<S: Scalar>(a: &Image<S>, b: &Image<S>) -> Result<AnomalyMap<S>, AnomalyError> {
    a.check_same_shape(b)?;
    let c = S::cst(a.channels() as f64);
    let data = (0..a.height() * a.width())
        .map(|p| {
            let mut acc = S::zero();
            for ch in 0..a.channels() {
                let d = a.data()[p * a.channels() + ch] - b.data()[p * a.channels() + ch];
                acc += d * d;
            }
            acc / c
        })
        .collect();
    AnomalyMap::new(a.height(), a.width(), data)
}

/// (1 - SSIM) / 2 with Gaussian-weighted local statistics (window 11,
/// sigma 1.5, standard stability constants at unit dynamic range),
/// channel-averaged and clipped to [0, 1].
pub fn delta_ssim<S: Scalar>(a: &Image<S>, b: &Image<S>, window: usize) -> Result<AnomalyMap<S>, AnomalyError> {
    a.check_same_shape(b)?;
    if window == 0 || window % 2 == 0 {
        return Err(AnomalyError::Spec(format!("SSIM window {window} must be odd")));
    }
    if window > a.height() || window > a.width() {
        return Err(AnomalyError::WindowTooLarge { window, h: a.height(), w: a.width() });
    }
    let (h, w, channels) = (a.height(), a.width(), a.channels());
    let weights = gaussian_weights::<S>(window, SSIM_SIGMA);
    let c1 = S::cst(SSIM_C1);
    let c2 = S::cst(SSIM_C2);
    let two = S::cst(2.0);
    let mut ssim_sum = vec![S::zero(); h * w];
    for ch in 0..channels {
        let plane_a = extract_channel(a, ch);
        let plane_b = extract_channel(b, ch);
        let prod: Vec<S> = plane_a.iter().zip(&plane_b).map(|(&x, &y)| x * y).collect();
        let sq_a: Vec<S> = plane_a.iter().map(|&x| x * x).collect();
        let sq_b: Vec<S> = plane_b.iter().map(|&x| x * x).collect();
        let mu_a = gaussian_blur(&plane_a, h, w, &weights);
        let mu_b = gaussian_blur(&plane_b, h, w, &weights);
        let e_sq_a = gaussian_blur(&sq_a, h, w, &weights);
        let e_sq_b = gaussian_blur(&sq_b, h, w, &weights);
        let e_prod = gaussian_blur(&prod, h, w, &weights);
        for p in 0..h * w {
            let var_a = e_sq_a[p] - mu_a[p] * mu_a[p];
            let var_b = e_sq_b[p] - mu_b[p] * mu_b[p];
            let cov = e_prod[p] - mu_a[p] * mu_b[p];
            let num = (two * mu_a[p] * mu_b[p] + c1) * (two * cov + c2);
            let den = (mu_a[p] * mu_a[p] + mu_b[p] * mu_b[p] + c1) * (var_a + var_b + c2);
            ssim_sum[p] += num / den;
        }
    }
    let c = S::cst(channels as f64);
    let half = S::cst(0.5);
    let data = ssim_sum
        .into_iter()
        .map(|s| ((S::one() - s / c) * half).max(S::zero()).min(S::one()))
        .collect();
    AnomalyMap::new(h, w, data)
}

/// 1 - GMS per pixel, with gradient magnitudes from normalized 3x3 Prewitt
/// responses on the channel-mean image.
pub fn delta_gms<S: Scalar>(a: &Image<S>, b: &Image<S>) -> Result<AnomalyMap<S>, AnomalyError> {
    a.check_same_shape(b)?;
    let (h, w) = (a.height(), a.width());
    let ga = gradient_magnitude(&a.channel_mean(), h, w);
    let gb = gradient_magnitude(&b.channel_mean(), h, w);
    let c = S::cst(GMS_C);
    let two = S::cst(2.0);
    let data = ga
        .iter()
        .zip(&gb)
        .map(|(&x, &y)| {
            let gms = (two * x * y + c) / (x * x + y * y + c);
            (S::one() - gms).max(S::zero()).min(S::one())
        })
        .collect();
    AnomalyMap::new(h, w, data)
}

fn extract_channel<S: Scalar>(img: &Image<S>, ch: usize) -> Vec<S> {
    (0..img.height() * img.width())
        .map(|p| img.data()[p * img.channels() + ch])
        .collect()
}

fn gaussian_weights<S: Scalar>(window: usize, sigma: f64) -> Vec<S> {
    let center = (window / 2) as f64;
    let raw: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - center).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| S::cst(v / total)).collect()
}

/// Separable weighted blur with reflected boundaries.
fn gaussian_blur<S: Scalar>(plane: &[S], h: usize, w: usize, weights: &[S]) -> Vec<S> {
    let r = (weights.len() / 2) as isize;
    let mut horiz = vec![S::zero(); h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = S::zero();
            for (wi, o) in weights.iter().zip(-r..=r) {
                acc += *wi * row[reflect_index(x as isize + o, w)];
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = vec![S::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = S::zero();
            for (wi, o) in weights.iter().zip(-r..=r) {
                acc += *wi * horiz[reflect_index(y as isize + o, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// sqrt(gx^2 + gy^2) from Prewitt kernels with entries +-1/3.
fn gradient_magnitude<S: Scalar>(plane: &[S], h: usize, w: usize) -> Vec<S> {
    let third = S::cst(1.0 / 3.0);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut gx = S::zero();
            let mut gy = S::zero();
            for o in -1..=1isize {
                let yy = reflect_index(y as isize + o, h);
                let x_left = reflect_index(x as isize - 1, w);
                let x_right = reflect_index(x as isize + 1, w);
                gx += plane[yy * w + x_right] - plane[yy * w + x_left];
                let xx = reflect_index(x as isize + o, w);
                let y_up = reflect_index(y as isize - 1, h);
                let y_down = reflect_index(y as isize + 1, h);
                gy += plane[y_down * w + xx] - plane[y_up * w + xx];
            }
            gx *= third;
            gy *= third;
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}
