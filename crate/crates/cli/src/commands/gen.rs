//! `fae gen`: corruption-model preview. Writes N triples of clean image,
//! corrupted image, and the continuous opacity mask, plus an index file.

use anyhow::Result;
use fae_core::corruption::corrupt_image;
use fae_core::eval::{normal_image, synth_dataset};
use fae_core::io::pnm::{self, BitDepth};
use fae_core::rng::Seeder;

use crate::config::{Dtype, RunConfig};

pub fn run(cfg: &RunConfig) -> Result<bool> {
    match cfg.dtype()? {
        Dtype::F32 => generate::<f32>(cfg),
        Dtype::F64 => generate::<f64>(cfg),
    }
}

fn generate<S: fae_core::Scalar>(cfg: &RunConfig) -> Result<bool> {
    let out_dir = cfg.out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let benchmark = cfg.benchmark()?;
    let corruption = cfg.train_corruption()?;
    let seeder = Seeder::new(cfg.seed()?);
    let mut img_rng = seeder.stream("gen-img");
    let count = cfg.gen_count()?;
    let mut index = String::new();
    for i in 0..count {
        let clean = normal_image::<S>(&benchmark, &mut img_rng);
        let mut rng = seeder.stream_indexed("gen-corrupt", i as u64);
        let (corrupted, mask) = corrupt_image(&clean, &corruption, &mut rng)?;
        let clean_name = format!("{i:04}_clean.pgm");
        let corrupted_name = format!("{i:04}_corrupted.pgm");
        let mask_name = format!("{i:04}_mask.pgm");
        pnm::write_image(&out_dir.join(&clean_name), &clean, BitDepth::Sixteen)?;
        pnm::write_image(&out_dir.join(&corrupted_name), &corrupted, BitDepth::Sixteen)?;
        pnm::write_mask(&out_dir.join(&mask_name), &mask, BitDepth::Sixteen)?;
        index.push_str(&format!("{i}\t{clean_name}\t{corrupted_name}\t{mask_name}\n"));
    }
    std::fs::write(out_dir.join("index.tsv"), index)?;
    println!("wrote {count} triples to {}", out_dir.display());
    if cfg.gen_dataset()? {
        export_dataset::<S>(cfg)?;
    }
    Ok(true)
}

/// Full benchmark export: train/ images and test/ images with labels and
/// ground-truth masks, indexed as path, label, mask path.
fn export_dataset<S: fae_core::Scalar>(cfg: &RunConfig) -> Result<()> {
    let out_dir = cfg.out_dir();
    let train_dir = out_dir.join("train");
    let test_dir = out_dir.join("test");
    std::fs::create_dir_all(&train_dir)?;
    std::fs::create_dir_all(&test_dir)?;
    let dataset = synth_dataset::<S>(&cfg.benchmark()?, &Seeder::new(cfg.seed()?))?;
    for (i, img) in dataset.train.iter().enumerate() {
        pnm::write_image(&train_dir.join(format!("{i:04}.pgm")), img, BitDepth::Sixteen)?;
    }
    let mut index = String::new();
    for (i, sample) in dataset.test.iter().enumerate() {
        let img_name = format!("test/{i:04}.pgm");
        let mask_name = format!("test/{i:04}_mask.pgm");
        pnm::write_image(&out_dir.join(&img_name), &sample.image, BitDepth::Sixteen)?;
        pnm::write_mask(&out_dir.join(&mask_name), &sample.gt_mask, BitDepth::Sixteen)?;
        index.push_str(&format!("{img_name}\t{}\t{mask_name}\n", u8::from(sample.label)));
    }
    std::fs::write(out_dir.join("dataset_index.tsv"), index)?;
    println!(
        "exported dataset: {} train, {} test to {}",
        dataset.train.len(),
        dataset.test.len(),
        out_dir.display()
    );
    Ok(())
}
