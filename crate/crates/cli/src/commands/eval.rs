//! `fae eval`: score a checkpoint on the held-out test set, write the
//! metrics CSV, and render heatmaps.

use anyhow::{Context, Result};
use fae_core::anomaly::{delta, mean_filter};
use fae_core::eval::{evaluate, synth_dataset, MetricsReport, NetReconstructor, Reconstructor};
use fae_core::net::read_checkpoint;
use fae_core::rng::Seeder;
use fae_core::Scalar;

use crate::config::{Dtype, RunConfig};

pub fn run(cfg: &RunConfig) -> Result<bool> {
    match cfg.dtype()? {
        Dtype::F32 => score::<f32>(cfg),
        Dtype::F64 => score::<f64>(cfg),
    }
}

fn score<S: Scalar>(cfg: &RunConfig) -> Result<bool> {
    let out_dir = cfg.out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let path = cfg.checkpoint_path();
    let (net, params) =
        read_checkpoint::<S>(&path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let seeder = Seeder::new(cfg.seed()?);
    let dataset = synth_dataset::<S>(&cfg.benchmark()?, &seeder)?;
    let settings = cfg.eval_settings()?;
    let recon = NetReconstructor { net: &net, params: &params };
    let report = evaluate(&recon, &dataset.test, &settings, &cfg.digest(), cfg.seed()?)?;

    let mut csv = String::from(MetricsReport::CSV_HEADER);
    csv.push('\n');
    csv.push_str(&report.csv_rows());
    std::fs::write(out_dir.join("metrics.csv"), csv)?;
    let summary = format!(
        "i_auroc = {}\np_auroc = {}\ni_degenerate = {}\np_degenerate = {}\nseed = {}\nconfig_digest = {}\n",
        report.i_auroc,
        report.p_auroc,
        report.i_degenerate,
        report.p_degenerate,
        report.seed,
        report.config_digest
    );
    std::fs::write(out_dir.join("metrics_summary.txt"), &summary)?;
    print!("{summary}");

    for (i, sample) in dataset.test.iter().take(cfg.heatmap_count()?).enumerate() {
        let rec = recon.reconstruct(i, &sample.image)?;
        let map = mean_filter(&delta(settings.delta, &sample.image, &rec)?, &settings.smoothing)?;
        super::write_heatmap(&out_dir.join(format!("heatmap_{i:04}")), &map)?;
    }
    if report.i_degenerate || report.p_degenerate {
        println!("warning: degenerate score distribution (all values equal)");
    }

    // Side-by-side metrics for every difference map, same smoothing and
    // reduction as the main run.
    let mut table = String::from("delta,i_auroc,p_auroc\n");
    for kind in [fae_core::anomaly::DeltaKind::Mse, fae_core::anomaly::DeltaKind::Ssim, fae_core::anomaly::DeltaKind::Gms] {
        let alt = fae_core::eval::EvalSettings { delta: kind, ..settings };
        let r = evaluate(&recon, &dataset.test, &alt, &cfg.digest(), cfg.seed()?)?;
        table.push_str(&format!("{kind:?},{},{}\n", r.i_auroc, r.p_auroc));
    }
    std::fs::write(out_dir.join("metrics_by_delta.csv"), table)?;
    Ok(true)
}
