//! `fae ablate`: paired comparison of training with and without the
//! Gaussian noise range, over a list of seeds.

use anyhow::Result;
use fae_core::eval::{ablation, BenchmarkRun};

use crate::config::{Dtype, RunConfig};

pub fn run(cfg: &RunConfig) -> Result<bool> {
    let out_dir = cfg.out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let net = cfg.network()?;
    let run = BenchmarkRun {
        benchmark: cfg.benchmark()?,
        schedule: cfg.schedule()?,
        settings: cfg.eval_settings()?,
    };
    let seeds = cfg.ablate_seeds()?;
    let report = match cfg.dtype()? {
        Dtype::F32 => ablation::<f32>(&run, &net, &seeds)?,
        Dtype::F64 => ablation::<f64>(&run, &net, &seeds)?,
    };

    let mut csv = String::from("seed,arm,i_auroc,p_auroc\n");
    for (i, &seed) in report.seeds.iter().enumerate() {
        csv.push_str(&format!(
            "{seed},with_noise,{},{}\n",
            report.with_noise.i_aurocs[i], report.with_noise.p_aurocs[i]
        ));
        csv.push_str(&format!(
            "{seed},without_noise,{},{}\n",
            report.without_noise.i_aurocs[i], report.without_noise.p_aurocs[i]
        ));
    }
    std::fs::write(out_dir.join("ablation.csv"), csv)?;
    let spread_note = format!(
        "spread: without-noise std {} vs with-noise std {}\n",
        report.without_noise.std_p_auroc, report.with_noise.std_p_auroc
    );
    let summary = format!("{}{}", report.summary(), spread_note);
    std::fs::write(out_dir.join("ablation_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(true)
}
