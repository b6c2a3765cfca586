//! Synthetic desk-scale benchmark: a striped texture family as the normal
//! class, held-out corruption draws as test anomalies.
//!
//! Training and test corruptions are generated from differently labeled
//! seed substreams and separate texture families, so the parameter sets are
//! disjoint by construction and the detector is tested on corruption
//! statistics it never saw.

use super::{EvalError, LabeledSample};
use crate::corruption::{corrupt_image, CorruptionConfig, TextureFamily, TextureSource};
use crate::image::{Image, Mask};
use crate::rng::{standard_normal, uniform, Seeder, Stream};
use crate::scalar::Scalar;

/// Generative description of the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub height: usize,
    pub width: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub anomalous_count: usize,
    /// Stripe family of the normal class.
    pub stripe_period: f64,
    pub stripe_angle: f64,
    pub stripe_amplitude: f64,
    /// Per-image intra-class variation.
    pub brightness_jitter: f64,
    pub phase_jitter: bool,
    /// Pixel noise added to test images only (both classes), emulating
    /// acquisition noise absent from the clean training set.
    pub sensor_noise: f64,
    /// Corruption model used during training.
    pub train_corruption: CorruptionConfig,
    /// Held-out corruption model for test anomalies.
    pub test_corruption: CorruptionConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let train_corruption = CorruptionConfig {
            area_min: 0.005,
            area_max: 0.25,
            texture: TextureSource::Procedural(TextureFamily {
                scales: vec![4, 8],
                octave_amplitudes: vec![0.7, 0.35, 0.18],
            }),
            ..CorruptionConfig::default()
        };
        let test_corruption = CorruptionConfig {
            area_min: 0.015,
            area_max: 0.20,
            opacity: (0.8, 1.0),
            texture: TextureSource::Procedural(TextureFamily {
                scales: vec![6, 12],
                octave_amplitudes: vec![0.8, 0.3],
            }),
            ..CorruptionConfig::default()
        };
        Self {
            height: 64,
            width: 64,
            train_count: 200,
            test_count: 100,
            anomalous_count: 50,
            stripe_period: 8.0,
            stripe_angle: 0.35,
            stripe_amplitude: 0.18,
            brightness_jitter: 0.04,
            phase_jitter: true,
            sensor_noise: 0.1,
            train_corruption,
            test_corruption,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.train_count == 0 || self.test_count == 0 {
            return Err(EvalError::Config("train and test counts must be positive".into()));
        }
        if self.anomalous_count > self.test_count {
            return Err(EvalError::Config(format!(
                "anomalous count {} exceeds test count {}",
                self.anomalous_count, self.test_count
            )));
        }
        if self.height < 16 || self.width < 16 {
            return Err(EvalError::Config("benchmark images must be at least 16x16".into()));
        }
        Ok(())
    }
}

/// Records which derived seeds produced which corruption draws; training
/// and test sets must never share one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub train_data_seed: u64,
    pub test_corruption_seeds: Vec<u64>,
}

impl DatasetManifest {
    pub fn disjoint(&self) -> bool {
        !self.test_corruption_seeds.contains(&self.train_data_seed)
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset<S> {
    pub train: Vec<Image<S>>,
    pub test: Vec<LabeledSample<S>>,
    /// Clean counterparts of the test images, for oracle experiments.
    pub clean_test: Vec<Image<S>>,
    pub manifest: DatasetManifest,
}

/// One normal-class image: fixed stripe family with per-image phase and
/// brightness jitter.
pub fn normal_image<S: Scalar>(cfg: &BenchmarkConfig, rng: &mut Stream) -> Image<S> {
    let phase = if cfg.phase_jitter { uniform::<f64, _>(rng, 0.0, std::f64::consts::TAU) } else { 0.0 };
    let brightness = uniform::<f64, _>(rng, -cfg.brightness_jitter, cfg.brightness_jitter);
    let (sin_a, cos_a) = cfg.stripe_angle.sin_cos();
    let freq = std::f64::consts::TAU / cfg.stripe_period;
    let mut data = Vec::with_capacity(cfg.height * cfg.width);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let u = cos_a * x as f64 + sin_a * y as f64;
            let v = 0.5 + brightness + cfg.stripe_amplitude * (freq * u + phase).sin();
            data.push(S::cst(v.clamp(0.0, 1.0)));
        }
    }
    Image::new(cfg.height, cfg.width, 1, data).expect("valid shape")
}

fn add_sensor_noise<S: Scalar>(img: &mut Image<S>, sigma: f64, rng: &mut Stream) {
    if sigma == 0.0 {
        return;
    }
    let s = S::cst(sigma);
    for v in img.data_mut() {
        *v = (*v + standard_normal::<S, _>(rng) * s).max(S::zero()).min(S::one());
    }
}

/// Generates the benchmark: clean training images, and a test set whose
/// anomalous members carry held-out corruptions with binarized ground
/// truth. Anomalous samples come first, then normal ones.
pub fn synth_dataset<S: Scalar>(
    cfg: &BenchmarkConfig,
    seeder: &Seeder,
) -> Result<SynthDataset<S>, EvalError> {
    cfg.validate()?;
    let mut train_rng = seeder.stream("train-img");
    let train: Vec<Image<S>> = (0..cfg.train_count).map(|_| normal_image(cfg, &mut train_rng)).collect();

    let mut test = Vec::with_capacity(cfg.test_count);
    let mut clean_test = Vec::with_capacity(cfg.test_count);
    let mut test_corruption_seeds = Vec::with_capacity(cfg.anomalous_count);
    let mut test_img_rng = seeder.stream("test-img");
    let mut noise_rng = seeder.stream("test-noise");
    for i in 0..cfg.test_count {
        let clean = normal_image::<S>(cfg, &mut test_img_rng);
        let anomalous = i < cfg.anomalous_count;
        let (mut image, gt_mask) = if anomalous {
            test_corruption_seeds.push(seeder.derived_seed("test-corrupt", i as u64));
            let mut rng = seeder.stream_indexed("test-corrupt", i as u64);
            let (corrupted, mask) = corrupt_image(&clean, &cfg.test_corruption, &mut rng)?;
            (corrupted, mask.binarized())
        } else {
            (clean.clone(), Mask::zeros(cfg.height, cfg.width))
        };
        add_sensor_noise(&mut image, cfg.sensor_noise, &mut noise_rng);
        clean_test.push(clean);
        test.push(LabeledSample::new(image, gt_mask)?);
    }
    let manifest = DatasetManifest {
        train_data_seed: seeder.derived_seed("data", 0),
        test_corruption_seeds,
    };
    Ok(SynthDataset { train, test, clean_test, manifest })
}
