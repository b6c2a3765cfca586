pub mod ablate;
pub mod eval;
pub mod gen;
pub mod train;
pub mod verify;

use std::path::Path;

use anyhow::Result;
use fae_core::anomaly::AnomalyMap;
use fae_core::image::Image;
use fae_core::io::pnm::{self, BitDepth};
use fae_core::scalar::Scalar;

/// Renders a heatmap as a 16-bit PGM, min-max normalized, with the scale
/// recorded in a sidecar text file and the raw values in a CSV for exact
/// comparisons.
pub fn write_heatmap<S: Scalar>(base: &Path, map: &AnomalyMap<S>) -> Result<()> {
    let lo = map.data().iter().cloned().fold(S::infinity(), S::min);
    let hi = map.data().iter().cloned().fold(S::neg_infinity(), S::max);
    let span = if hi > lo { hi - lo } else { S::one() };
    let normalized: Vec<S> = map.data().iter().map(|&v| (v - lo) / span).collect();
    let img = Image::new(map.height(), map.width(), 1, normalized)?;
    pnm::write_image(&base.with_extension("pgm"), &img, BitDepth::Sixteen)?;
    std::fs::write(
        base.with_extension("txt"),
        format!("min = {}\nmax = {}\n", lo.to_f64_lossy(), hi.to_f64_lossy()),
    )?;
    let mut csv = String::new();
    for y in 0..map.height() {
        let row: Vec<String> =
            (0..map.width()).map(|x| map.get(y, x).to_f64_lossy().to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(base.with_extension("csv"), csv)?;
    Ok(())
}
