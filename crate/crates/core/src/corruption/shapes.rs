//! Occlusion shape masks: elastically deformed ellipse blobs and thin
//! curve strokes. Both generators are binary-valued; opacity is applied
//! later during composition.

use rand::Rng;

use super::{CorruptionConfig, CorruptionError};
use crate::image::Mask;
use crate::rng::{standard_normal, uniform, Stream};
use crate::scalar::Scalar;

/// Broad, bulky occlusion shapes: 1..N random ellipses warped by a smooth
/// random displacement field. Regenerates until the positive-area fraction
/// lands inside the configured bounds.
pub fn generate_blob_mask<S: Scalar>(
    rng: &mut Stream,
    h: usize,
    w: usize,
    cfg: &CorruptionConfig,
) -> Result<Mask<S>, CorruptionError> {
    cfg.validate()?;
    check_min_size(h, w)?;
    let mut last = 0.0;
    for _ in 0..cfg.retry_budget {
        let count = rng.random_range(cfg.ellipse_count.0..=cfg.ellipse_count.1);
        let mut mask = Mask::zeros(h, w);
        for _ in 0..count {
            stamp_ellipse(&mut mask, random_ellipse(rng, h, w, cfg));
        }
        if cfg.elastic_amplitude_frac > 0.0 {
            let amp = cfg.elastic_amplitude_frac * h.min(w) as f64;
            let field = displacement_field(rng, h, w, cfg.elastic_grid, amp);
            mask = warp_nearest(&mask, &field);
        }
        last = mask.area_fraction();
        if last >= cfg.area_min && last <= cfg.area_max {
            return Ok(mask);
        }
    }
    Err(CorruptionError::AreaBounds {
        got: last,
        min: cfg.area_min,
        max: cfg.area_max,
        attempts: cfg.retry_budget,
    })
}

/// Thin, elongated occlusion shapes: 1..N smooth random polylines stroked
/// with a small thickness.
pub fn generate_curve_mask<S: Scalar>(
    rng: &mut Stream,
    h: usize,
    w: usize,
    cfg: &CorruptionConfig,
) -> Result<Mask<S>, CorruptionError> {
    cfg.validate()?;
    check_min_size(h, w)?;
    let mut last = 0.0;
    for _ in 0..cfg.retry_budget {
        let count = rng.random_range(cfg.curve_count.0..=cfg.curve_count.1);
        let mut mask = Mask::zeros(h, w);
        for _ in 0..count {
            let pts = random_polyline(rng, h, w, cfg);
            let smooth = chaikin(&pts, 2);
            let thickness = uniform(rng, cfg.curve_thickness.0, cfg.curve_thickness.1);
            stroke_polyline(&mut mask, &smooth, thickness);
        }
        last = mask.area_fraction();
        if last >= cfg.area_min && last <= cfg.area_max {
            return Ok(mask);
        }
    }
    Err(CorruptionError::AreaBounds {
        got: last,
        min: cfg.area_min,
        max: cfg.area_max,
        attempts: cfg.retry_budget,
    })
}

fn check_min_size(h: usize, w: usize) -> Result<(), CorruptionError> {
    if h < 16 || w < 16 {
        return Err(CorruptionError::Config(format!("mask size {h}x{w} below 16x16 minimum")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Ellipse {
    pub cy: f64,
    pub cx: f64,
    pub ry: f64,
    pub rx: f64,
    pub angle: f64,
}

fn random_ellipse(rng: &mut Stream, h: usize, w: usize, cfg: &CorruptionConfig) -> Ellipse {
    let scale = h.min(w) as f64;
    let r = |rng: &mut Stream| uniform(rng, cfg.ellipse_radius_frac.0, cfg.ellipse_radius_frac.1) * scale;
    Ellipse {
        cy: uniform(rng, 0.0, h as f64),
        cx: uniform(rng, 0.0, w as f64),
        ry: r(rng),
        rx: r(rng),
        angle: uniform(rng, 0.0, std::f64::consts::PI),
    }
}

/// Marks every pixel whose center lies inside the ellipse.
pub(crate) fn stamp_ellipse<S: Scalar>(mask: &mut Mask<S>, e: Ellipse) {
    let (sin, cos) = e.angle.sin_cos();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let dy = (y as f64 + 0.5) - e.cy;
            let dx = (x as f64 + 0.5) - e.cx;
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            if (u / e.rx).powi(2) + (v / e.ry).powi(2) <= 1.0 {
                mask.set(y, x, S::one());
            }
        }
    }
}

/// Per-pixel (dy, dx) displacements: i.i.d. Gaussian on a coarse grid,
/// bilinearly upsampled. Grid nodes sit at the image corners so the field
/// covers the full extent.
pub(crate) fn displacement_field(
    rng: &mut Stream,
    h: usize,
    w: usize,
    grid: usize,
    amplitude: f64,
) -> Vec<(f64, f64)> {
    let g = grid.max(2);
    let nodes: Vec<(f64, f64)> = (0..g * g)
        .map(|_| {
            let dy: f64 = standard_normal::<f64, _>(rng) * amplitude;
            let dx: f64 = standard_normal::<f64, _>(rng) * amplitude;
            (dy, dx)
        })
        .collect();
    let mut field = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let gy = if h > 1 { y as f64 / (h - 1) as f64 * (g - 1) as f64 } else { 0.0 };
            let gx = if w > 1 { x as f64 / (w - 1) as f64 * (g - 1) as f64 } else { 0.0 };
            let y0 = (gy.floor() as usize).min(g - 2);
            let x0 = (gx.floor() as usize).min(g - 2);
            let fy = gy - y0 as f64;
            let fx = gx - x0 as f64;
            let at = |yy: usize, xx: usize| nodes[yy * g + xx];
            let lerp2 = |a: (f64, f64), b: (f64, f64), t: f64| {
                (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
            };
            let top = lerp2(at(y0, x0), at(y0, x0 + 1), fx);
            let bot = lerp2(at(y0 + 1, x0), at(y0 + 1, x0 + 1), fx);
            field.push(lerp2(top, bot, fy));
        }
    }
    field
}

/// Nearest-neighbor backward warp; samples falling outside the image read 0,
/// which keeps the mask binary.
pub(crate) fn warp_nearest<S: Scalar>(mask: &Mask<S>, field: &[(f64, f64)]) -> Mask<S> {
    let (h, w) = (mask.height(), mask.width());
    let mut out = Mask::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = field[y * w + x];
            let sy = (y as f64 + dy).round();
            let sx = (x as f64 + dx).round();
            if sy >= 0.0 && sx >= 0.0 && (sy as usize) < h && (sx as usize) < w {
                out.set(y, x, mask.get(sy as usize, sx as usize));
            }
        }
    }
    out
}

/// Random-walk control points with persistent heading.
fn random_polyline(rng: &mut Stream, h: usize, w: usize, cfg: &CorruptionConfig) -> Vec<(f64, f64)> {
    let scale = h.min(w) as f64;
    let total = uniform(rng, cfg.curve_length_frac.0, cfg.curve_length_frac.1) * scale;
    let segments = rng.random_range(3..=6usize);
    let step = total / segments as f64;
    let mut pts = Vec::with_capacity(segments + 1);
    let mut y = uniform(rng, 0.1, 0.9) * h as f64;
    let mut x = uniform(rng, 0.1, 0.9) * w as f64;
    let mut theta = uniform(rng, 0.0, std::f64::consts::TAU);
    pts.push((y, x));
    for _ in 0..segments {
        theta += uniform(rng, -0.7, 0.7);
        y += step * theta.sin();
        x += step * theta.cos();
        pts.push((y, x));
    }
    pts
}

/// Chaikin corner cutting; each iteration replaces interior corners with
/// two points at 1/4 and 3/4 of the adjoining segments.
pub(crate) fn chaikin(points: &[(f64, f64)], iterations: usize) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    for _ in 0..iterations {
        if pts.len() < 3 {
            break;
        }
        let mut next = Vec::with_capacity(2 * pts.len());
        next.push(pts[0]);
        for pair in pts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            next.push((a.0 * 0.75 + b.0 * 0.25, a.1 * 0.75 + b.1 * 0.25));
            next.push((a.0 * 0.25 + b.0 * 0.75, a.1 * 0.25 + b.1 * 0.75));
        }
        next.push(*pts.last().expect("nonempty"));
        pts = next;
    }
    pts
}

/// Stamps every pixel whose center lies within `thickness / 2` of the path.
/// Polyline coordinates are (row, col) with pixel centers at half-integers.
pub(crate) fn stroke_polyline<S: Scalar>(mask: &mut Mask<S>, points: &[(f64, f64)], thickness: f64) {
    let radius = (thickness / 2.0).max(0.5);
    let (h, w) = (mask.height() as f64, mask.width() as f64);
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let steps = (len / 0.25).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let py = a.0 + (b.0 - a.0) * t;
            let px = a.1 + (b.1 - a.1) * t;
            let y_lo = ((py - radius).floor().max(0.0)) as usize;
            let y_hi = ((py + radius).ceil().min(h - 1.0)) as usize;
            let x_lo = ((px - radius).floor().max(0.0)) as usize;
            let x_hi = ((px + radius).ceil().min(w - 1.0)) as usize;
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let dy = (y as f64 + 0.5) - py;
                    let dx = (x as f64 + 0.5) - px;
                    if dy * dy + dx * dx <= radius * radius {
                        mask.set(y, x, S::one());
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    fn cfg() -> CorruptionConfig {
        CorruptionConfig::default()
    }

    #[test]
    fn zero_amplitude_leaves_ellipse_unwarped() {
        let mut mask = Mask::<f64>::zeros(32, 32);
        let e = Ellipse { cy: 16.0, cx: 14.0, ry: 6.0, rx: 9.0, angle: 0.0 };
        stamp_ellipse(&mut mask, e);
        let field = vec![(0.0, 0.0); 32 * 32];
        let warped = warp_nearest(&mask, &field);
        assert_eq!(mask, warped);
        // Direct oracle: pixel centers inside the axis-aligned ellipse.
        for y in 0..32 {
            for x in 0..32 {
                let dy = (y as f64 + 0.5 - 16.0) / 6.0;
                let dx = (x as f64 + 0.5 - 14.0) / 9.0;
                let expected = if dx * dx + dy * dy <= 1.0 { 1.0 } else { 0.0 };
                assert_eq!(mask.get(y, x), expected, "pixel ({y},{x})");
            }
        }
    }

    #[test]
    fn blob_mask_is_binary_within_bounds_and_deterministic() {
        let c = cfg();
        let mut rng = Seeder::new(3).stream("shape");
        let m = generate_blob_mask::<f64>(&mut rng, 48, 48, &c).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.0));
        let frac = m.area_fraction();
        assert!(frac >= c.area_min && frac <= c.area_max, "fraction {frac}");
        let mut rng2 = Seeder::new(3).stream("shape");
        let m2 = generate_blob_mask::<f64>(&mut rng2, 48, 48, &c).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn impossible_bounds_error_names_the_bound() {
        let mut c = cfg();
        c.area_min = 0.90;
        c.area_max = 0.95;
        c.retry_budget = 4;
        let mut rng = Seeder::new(1).stream("shape");
        let err = generate_blob_mask::<f64>(&mut rng, 32, 32, &c).unwrap_err();
        match err {
            CorruptionError::AreaBounds { min, max, attempts, .. } => {
                assert_eq!((min, max, attempts), (0.90, 0.95, 4));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn straight_two_point_polyline_thickness_one_is_single_pixel_line() {
        let mut mask = Mask::<f64>::zeros(16, 16);
        // Pixel-center aligned horizontal path along row 7.
        stroke_polyline(&mut mask, &[(7.5, 2.5), (7.5, 12.5)], 1.0);
        for y in 0..16 {
            for x in 0..16 {
                let expected = if y == 7 && (2..=12).contains(&x) { 1.0 } else { 0.0 };
                assert_eq!(mask.get(y, x), expected, "pixel ({y},{x})");
            }
        }
    }

    #[test]
    fn stroke_area_tracks_thickness_times_length() {
        let mut mask = Mask::<f64>::zeros(64, 64);
        let (t, l) = (3.0, 40.0);
        stroke_polyline(&mut mask, &[(30.5, 10.5), (30.5, 10.5 + l)], t);
        let area = mask.data().iter().filter(|&&v| v > 0.0).count() as f64;
        assert!(area >= 0.8 * t * l && area <= 1.2 * t * l, "area {area}");
    }

    #[test]
    fn curve_mask_thin_binary_and_deterministic() {
        let c = cfg();
        let mut rng = Seeder::new(9).stream("curve");
        let m = generate_curve_mask::<f64>(&mut rng, 64, 64, &c).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.0));
        let frac = m.area_fraction();
        assert!(frac >= c.area_min && frac <= c.area_max, "fraction {frac}");
        let mut rng2 = Seeder::new(9).stream("curve");
        assert_eq!(m, generate_curve_mask::<f64>(&mut rng2, 64, 64, &c).unwrap());
    }

    #[test]
    fn chaikin_preserves_endpoints() {
        let pts = vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)];
        let sm = chaikin(&pts, 3);
        assert_eq!(sm.first(), Some(&(0.0, 0.0)));
        assert_eq!(sm.last(), Some(&(10.0, 10.0)));
        assert!(sm.len() > pts.len());
    }

    #[test]
    fn small_images_rejected() {
        let mut rng = Seeder::new(0).stream("shape");
        assert!(generate_blob_mask::<f64>(&mut rng, 8, 32, &cfg()).is_err());
    }
}
