//! `fae train`: optimize the reconstruction network and write the
//! checkpoint plus the training log.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fae_core::eval::synth_dataset;
use fae_core::image::Image;
use fae_core::io::pnm;
use fae_core::net::{train, write_checkpoint};
use fae_core::rng::Seeder;
use fae_core::Scalar;

use crate::config::{Dtype, RunConfig};

pub fn run(cfg: &RunConfig) -> Result<bool> {
    match cfg.dtype()? {
        Dtype::F32 => fit::<f32>(cfg),
        Dtype::F64 => fit::<f64>(cfg),
    }
}

fn fit<S: Scalar>(cfg: &RunConfig) -> Result<bool> {
    let out_dir = cfg.out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let net = cfg.network()?;
    let schedule = cfg.schedule()?;
    let corruption = cfg.train_corruption()?;
    let seeder = Seeder::new(cfg.seed()?);
    let images: Vec<Image<S>> = match cfg.train_dir() {
        Some(dir) => load_images(&dir)?,
        None => synth_dataset::<S>(&cfg.benchmark()?, &seeder)?.train,
    };
    println!("training on {} images, {} steps", images.len(), schedule.steps);
    let outcome = train(&net, &images, &corruption, &schedule, &seeder)?;

    let mut log = String::from("step,loss,sigma_mean\n");
    for row in &outcome.log {
        log.push_str(&format!("{},{},{}\n", row.step, row.loss, row.sigma_mean));
    }
    std::fs::write(out_dir.join("train_log.csv"), log)?;
    for ckpt in &outcome.checkpoints {
        write_checkpoint(&out_dir.join(format!("ckpt_{:06}.ckpt", ckpt.step)), &net, &ckpt.params)?;
    }
    write_checkpoint(&out_dir.join("model.ckpt"), &net, &outcome.params)?;
    let final_loss = outcome.log.last().map_or(f64::NAN, |row| row.loss);
    println!("final loss = {final_loss}");
    println!("checkpoint = {}", out_dir.join("model.ckpt").display());
    Ok(true)
}

fn load_images<S: Scalar>(dir: &Path) -> Result<Vec<Image<S>>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading train_dir {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|s| s.to_str()), Some("pgm") | Some("ppm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("train_dir {} contains no .pgm/.ppm images", dir.display());
    }
    paths.iter().map(|p| Ok(pnm::read_image::<S>(p)?)).collect()
}
