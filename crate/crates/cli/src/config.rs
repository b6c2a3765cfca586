//! Run configuration: a flat key-value schema merged from an optional file
//! and `--set key=value` overrides. Unknown keys are rejected and the
//! effective configuration is echoed into the output directory, so a run
//! can always be reproduced from its own artifacts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fae_core::anomaly::{DeltaKind, Reduction, SmoothingSpec};
use fae_core::corruption::{CorruptionConfig, TextureFamily, TextureSource};
use fae_core::eval::{BenchmarkConfig, EvalSettings};
use fae_core::io::config::KeyValues;
use fae_core::net::{Activation, Network, NetworkConfig, TrainLoss, TrainSchedule};

/// Every accepted key with its default and a one-line description.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("seed", "0", "root seed; all randomness flows from it via named substreams"),
    ("out_dir", "out", "output directory"),
    ("workers", "1", "worker threads for per-image evaluation and Monte-Carlo"),
    ("dtype", "f32", "scalar type for train/eval pipelines: f32 | f64"),
    // Benchmark data.
    ("image_size", "64", "square image side in pixels"),
    ("train_count", "200", "training images"),
    ("test_count", "100", "test images"),
    ("anomalous_count", "50", "anomalous test images"),
    ("stripe_period", "8", "normal-texture stripe period in pixels"),
    ("stripe_angle", "0.35", "stripe orientation in radians"),
    ("stripe_amplitude", "0.18", "stripe contrast"),
    ("brightness_jitter", "0.04", "per-image brightness jitter"),
    ("phase_jitter", "true", "randomize stripe phase per image"),
    ("sensor_noise", "0.1", "pixel noise added to test images"),
    ("train_dir", "", "optional directory of PGM/PPM training images (empty = synthesize)"),
    // Training-side corruption model.
    ("area_min", "0.005", "min corrupted-area fraction"),
    ("area_max", "0.25", "max corrupted-area fraction"),
    ("ellipse_count_min", "1", "min ellipses per blob mask"),
    ("ellipse_count_max", "3", "max ellipses per blob mask"),
    ("ellipse_radius_min", "0.05", "min ellipse semi-axis (fraction of image side)"),
    ("ellipse_radius_max", "0.18", "max ellipse semi-axis (fraction of image side)"),
    ("elastic_grid", "4", "displacement-field grid nodes per side"),
    ("elastic_amplitude", "0.06", "displacement amplitude (fraction of image side)"),
    ("curve_count_min", "1", "min curves per curve mask"),
    ("curve_count_max", "3", "max curves per curve mask"),
    ("curve_length_min", "0.3", "min curve length (fraction of image side)"),
    ("curve_length_max", "0.9", "max curve length (fraction of image side)"),
    ("curve_thickness_min", "1", "min stroke thickness in pixels"),
    ("curve_thickness_max", "3", "max stroke thickness in pixels"),
    ("opacity_min", "0.3", "min occlusion opacity"),
    ("opacity_max", "0.9", "max occlusion opacity"),
    ("opaque_probability", "0.5", "probability of a fully opaque occlusion"),
    ("blob_probability", "0.85", "probability a pair draws a blob mask"),
    ("curve_probability", "0.5", "probability a pair draws a curve mask"),
    ("clean_pair_probability", "0.1", "probability of a corruption-free pair"),
    ("noise_sigma_max", "0.1", "upper bound r of sigma ~ Uniform(0, r)"),
    ("retry_budget", "32", "attempts before the area bounds fail loudly"),
    ("texture_dir", "", "directory of texture images (empty = procedural)"),
    ("texture_scales", "4,8", "procedural texture lattice spacings"),
    // Held-out corruption model for test anomalies.
    ("test_area_min", "0.015", "test-anomaly min area fraction"),
    ("test_area_max", "0.20", "test-anomaly max area fraction"),
    ("test_opacity_min", "0.8", "test-anomaly min opacity"),
    ("test_opacity_max", "1.0", "test-anomaly max opacity"),
    ("test_texture_scales", "6,12", "held-out texture lattice spacings"),
    // Network and optimization.
    ("arch", "conv", "architecture family: conv | dense"),
    ("conv_channels", "8,8", "hidden channels of the conv stack"),
    ("conv_kernel", "5", "conv kernel size"),
    ("dense_hidden", "128,64,128", "hidden widths of the dense autoencoder"),
    ("hidden_activation", "tanh", "relu | tanh | sigmoid | identity"),
    ("final_activation", "identity", "relu | tanh | sigmoid | identity"),
    ("steps", "3000", "optimization steps"),
    ("batch_size", "2", "pairs per step"),
    ("learning_rate", "0.002", "Adam learning rate"),
    ("train_loss", "fae", "fae | dae | weighted"),
    ("lambda", "0.5", "mask-region weight of the weighted loss"),
    ("log_every", "100", "steps per training-log row"),
    ("checkpoint_every", "0", "snapshot interval in steps (0 = final only)"),
    // Detection path.
    ("checkpoint", "", "checkpoint path for eval/verify (default <out_dir>/model.ckpt)"),
    ("delta", "gms", "difference map: mse | ssim | gms"),
    ("smoothing_kernel", "5", "mean-filter kernel size (odd)"),
    ("smoothing_repeats", "1", "mean-filter applications"),
    ("reduction", "sum", "image score reduction: sum | max"),
    ("per_image_pooling", "false", "pixel AUROC averaged per image instead of pooled"),
    ("heatmap_count", "8", "heatmaps rendered by eval"),
    // Generation.
    ("gen_count", "8", "corruption triples written by gen"),
    ("gen_dataset", "false", "also export the benchmark dataset (train/, test/, index)"),
    // Verifier.
    ("verify_sigmas", "0.1,0.075,0.05,0.035", "sigma list for the remainder fit"),
    ("verify_pairs", "100000", "antithetic pairs for the affine and moment checks"),
    ("verify_slope_pairs", "200000", "base pairs per sigma for the remainder fit"),
    ("verify_slope_cap", "3200000", "sample cap per sigma for the remainder fit"),
    ("verify_affine_count", "20", "random affine maps checked"),
    ("verify_tanh_net", "true", "also fit the remainder slope of a tanh network"),
    // Ablation.
    ("ablate_seeds", "1,2,3", "seeds for the paired noise ablation"),
];

/// Parsed, validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    values: KeyValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl RunConfig {
    /// Merge defaults <- file <- overrides, rejecting unknown keys.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut values = KeyValues::default();
        for (key, default, _) in SCHEMA {
            values.set(key, default);
        }
        if let Some(path) = file {
            let from_file =
                KeyValues::load(path).with_context(|| format!("loading config {}", path.display()))?;
            from_file.validate_keys(SCHEMA.iter().map(|(k, _, _)| *k))?;
            values = values.merged(&from_file);
        }
        let mut cli = KeyValues::default();
        for pair in overrides {
            let (key, value) = pair
                .split_once('=')
                .with_context(|| format!("override `{pair}` is not key=value"))?;
            cli.set(key.trim(), value.trim());
        }
        cli.validate_keys(SCHEMA.iter().map(|(k, _, _)| *k))?;
        values = values.merged(&cli);
        Ok(Self { values })
    }

    pub fn render(&self) -> String {
        self.values.render()
    }

    /// Write the effective configuration next to the run outputs.
    pub fn echo(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("config.txt"), self.render())?;
        Ok(())
    }

    fn get(&self, key: &str) -> &str {
        self.values.get(key).expect("schema key")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)
            .parse::<T>()
            .map_err(|_| anyhow::anyhow!("key `{key}`: cannot parse `{}`", self.get(key)))
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)
            .split(',')
            .map(|s| s.trim().parse::<T>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| anyhow::anyhow!("key `{key}`: cannot parse list `{}`", self.get(key)))
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out_dir"))
    }

    pub fn workers(&self) -> Result<usize> {
        self.parse("workers")
    }

    pub fn dtype(&self) -> Result<Dtype> {
        match self.get("dtype") {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => bail!("dtype must be f32 or f64, got `{other}`"),
        }
    }

    pub fn gen_count(&self) -> Result<usize> {
        self.parse("gen_count")
    }

    pub fn gen_dataset(&self) -> Result<bool> {
        self.parse("gen_dataset")
    }

    pub fn heatmap_count(&self) -> Result<usize> {
        self.parse("heatmap_count")
    }

    pub fn train_dir(&self) -> Option<PathBuf> {
        let raw = self.get("train_dir");
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        let raw = self.get("checkpoint");
        if raw.is_empty() {
            self.out_dir().join("model.ckpt")
        } else {
            PathBuf::from(raw)
        }
    }

    /// The checkpoint key only when the user set it.
    pub fn checkpoint_explicit(&self) -> Option<PathBuf> {
        let raw = self.get("checkpoint");
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    fn texture_source(&self, scales_key: &str) -> Result<TextureSource> {
        let dir = self.get("texture_dir");
        if dir.is_empty() {
            Ok(TextureSource::Procedural(TextureFamily {
                scales: self.parse_list(scales_key)?,
                octave_amplitudes: vec![0.7, 0.35, 0.18],
            }))
        } else {
            Ok(TextureSource::Directory(PathBuf::from(dir)))
        }
    }

    pub fn train_corruption(&self) -> Result<CorruptionConfig> {
        let cfg = CorruptionConfig {
            area_min: self.parse("area_min")?,
            area_max: self.parse("area_max")?,
            ellipse_count: (self.parse("ellipse_count_min")?, self.parse("ellipse_count_max")?),
            ellipse_radius_frac: (self.parse("ellipse_radius_min")?, self.parse("ellipse_radius_max")?),
            elastic_grid: self.parse("elastic_grid")?,
            elastic_amplitude_frac: self.parse("elastic_amplitude")?,
            curve_count: (self.parse("curve_count_min")?, self.parse("curve_count_max")?),
            curve_length_frac: (self.parse("curve_length_min")?, self.parse("curve_length_max")?),
            curve_thickness: (self.parse("curve_thickness_min")?, self.parse("curve_thickness_max")?),
            opacity: (self.parse("opacity_min")?, self.parse("opacity_max")?),
            opaque_probability: self.parse("opaque_probability")?,
            blob_probability: self.parse("blob_probability")?,
            curve_probability: self.parse("curve_probability")?,
            clean_pair_probability: self.parse("clean_pair_probability")?,
            noise_sigma_max: self.parse("noise_sigma_max")?,
            retry_budget: self.parse("retry_budget")?,
            texture: self.texture_source("texture_scales")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Held-out corruption model: training geometry with shifted area,
    /// opacity, and texture ranges.
    pub fn test_corruption(&self) -> Result<CorruptionConfig> {
        let cfg = CorruptionConfig {
            area_min: self.parse("test_area_min")?,
            area_max: self.parse("test_area_max")?,
            opacity: (self.parse("test_opacity_min")?, self.parse("test_opacity_max")?),
            texture: self.texture_source("test_texture_scales")?,
            ..self.train_corruption()?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn benchmark(&self) -> Result<BenchmarkConfig> {
        let size: usize = self.parse("image_size")?;
        let cfg = BenchmarkConfig {
            height: size,
            width: size,
            train_count: self.parse("train_count")?,
            test_count: self.parse("test_count")?,
            anomalous_count: self.parse("anomalous_count")?,
            stripe_period: self.parse("stripe_period")?,
            stripe_angle: self.parse("stripe_angle")?,
            stripe_amplitude: self.parse("stripe_amplitude")?,
            brightness_jitter: self.parse("brightness_jitter")?,
            phase_jitter: self.parse("phase_jitter")?,
            sensor_noise: self.parse("sensor_noise")?,
            train_corruption: self.train_corruption()?,
            test_corruption: self.test_corruption()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn activation(&self, key: &str) -> Result<Activation> {
        Ok(match self.get(key) {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            "identity" => Activation::Identity,
            other => bail!("key `{key}`: unknown activation `{other}`"),
        })
    }

    pub fn network(&self) -> Result<Network> {
        let size: usize = self.parse("image_size")?;
        let hidden_act = self.activation("hidden_activation")?;
        let final_act = self.activation("final_activation")?;
        let config = match self.get("arch") {
            "conv" => NetworkConfig::conv_stack(
                (size, size, 1),
                &self.parse_list::<usize>("conv_channels")?,
                self.parse("conv_kernel")?,
                hidden_act,
                final_act,
            ),
            "dense" => NetworkConfig::dense_autoencoder(
                (size, size, 1),
                &self.parse_list::<usize>("dense_hidden")?,
                hidden_act,
                final_act,
            ),
            other => bail!("arch must be conv or dense, got `{other}`"),
        };
        Ok(Network::new(config)?)
    }

    pub fn schedule(&self) -> Result<TrainSchedule> {
        let loss = match self.get("train_loss") {
            "fae" => TrainLoss::Fae,
            "dae" => TrainLoss::Dae,
            "weighted" => {
                let lambda: f64 = self.parse("lambda")?;
                if !(0.0..=1.0).contains(&lambda) {
                    bail!("lambda {lambda} must lie in [0, 1]");
                }
                TrainLoss::Weighted { lambda }
            }
            other => bail!("train_loss must be fae, dae, or weighted, got `{other}`"),
        };
        let checkpoint_every: usize = self.parse("checkpoint_every")?;
        Ok(TrainSchedule {
            steps: self.parse("steps")?,
            batch_size: self.parse("batch_size")?,
            learning_rate: self.parse("learning_rate")?,
            loss,
            log_every: self.parse("log_every")?,
            checkpoint_every: (checkpoint_every > 0).then_some(checkpoint_every),
        })
    }

    pub fn eval_settings(&self) -> Result<EvalSettings> {
        let delta: DeltaKind = self.get("delta").parse().map_err(anyhow::Error::msg)?;
        let reduction: Reduction = self.get("reduction").parse().map_err(anyhow::Error::msg)?;
        let settings = EvalSettings {
            delta,
            smoothing: SmoothingSpec {
                kernel: self.parse("smoothing_kernel")?,
                repeats: self.parse("smoothing_repeats")?,
            },
            reduction,
            per_image_pixel_pooling: self.parse("per_image_pooling")?,
        };
        settings.smoothing.validate()?;
        Ok(settings)
    }

    pub fn verify_sigmas(&self) -> Result<Vec<f64>> {
        self.parse_list("verify_sigmas")
    }

    pub fn verify_pairs(&self) -> Result<u64> {
        self.parse("verify_pairs")
    }

    pub fn verify_slope_pairs(&self) -> Result<u64> {
        self.parse("verify_slope_pairs")
    }

    pub fn verify_slope_cap(&self) -> Result<u64> {
        self.parse("verify_slope_cap")
    }

    pub fn verify_affine_count(&self) -> Result<usize> {
        self.parse("verify_affine_count")
    }

    pub fn verify_tanh_net(&self) -> Result<bool> {
        self.parse("verify_tanh_net")
    }

    pub fn ablate_seeds(&self) -> Result<Vec<u64>> {
        self.parse_list("ablate_seeds")
    }

    /// Stable fingerprint of the result-affecting configuration; the
    /// output location and worker count do not change any computed value.
    pub fn digest(&self) -> String {
        let mut filtered = self.values.clone();
        filtered.set("out_dir", "");
        filtered.set("workers", "");
        fae_core::eval::config_digest(&filtered.render())
    }
}
