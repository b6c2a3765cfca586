//! End-to-end evaluation and the with/without-noise ablation harness.

use rayon::prelude::*;

use super::auroc::{auroc, pixel_auroc, pixel_auroc_per_image};
use super::dataset::{synth_dataset, BenchmarkConfig, SynthDataset};
use super::{EvalError, LabeledSample};
use crate::anomaly::{delta, image_score, mean_filter, AnomalyMap, DeltaKind, Reduction, SmoothingSpec};
use crate::image::Image;
use crate::net::{train, Network, ParamVector, TrainLoss, TrainSchedule};
use crate::rng::Seeder;
use crate::scalar::Scalar;

/// Settings of the detection path at test time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub delta: DeltaKind,
    pub smoothing: SmoothingSpec,
    pub reduction: Reduction,
    pub per_image_pixel_pooling: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            delta: DeltaKind::Gms,
            smoothing: SmoothingSpec { kernel: 5, repeats: 1 },
            reduction: Reduction::Sum,
            per_image_pixel_pooling: false,
        }
    }
}

/// Anything that maps a test image to its reconstruction; the index allows
/// oracle stubs that look up stored references.
pub trait Reconstructor<S: Scalar>: Sync {
    fn reconstruct(&self, index: usize, image: &Image<S>) -> Result<Image<S>, EvalError>;
}

pub struct NetReconstructor<'a, S> {
    pub net: &'a Network,
    pub params: &'a ParamVector<S>,
}

impl<S: Scalar> Reconstructor<S> for NetReconstructor<'_, S> {
    fn reconstruct(&self, _index: usize, image: &Image<S>) -> Result<Image<S>, EvalError> {
        let out = self.net.forward(self.params, image.data())?;
        Ok(Image::new(image.height(), image.width(), image.channels(), out)?.clamped())
    }
}

/// Detection metrics over a labeled test set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub i_auroc: f64,
    pub p_auroc: f64,
    pub image_scores: Vec<f64>,
    pub labels: Vec<bool>,
    /// All image scores (resp. pixel values) were identical; the 0.5 that
    /// midranks produce carries no ranking information then.
    pub i_degenerate: bool,
    pub p_degenerate: bool,
    pub config_digest: String,
    pub seed: u64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "index,label,score";

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (i, (score, label)) in self.image_scores.iter().zip(&self.labels).enumerate() {
            out.push_str(&format!("{i},{},{score}\n", u8::from(*label)));
        }
        out
    }
}

/// Computes anomaly maps for every test sample, reduces image scores, and
/// ranks both levels. Per-image work runs in parallel; scores are collected
/// in index order so results do not depend on the worker count.
pub fn evaluate<S: Scalar>(
    recon: &dyn Reconstructor<S>,
    test: &[LabeledSample<S>],
    settings: &EvalSettings,
    config_digest: &str,
    seed: u64,
) -> Result<MetricsReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::Config("empty test set".into()));
    }
    settings.smoothing.validate()?;
    let maps: Vec<AnomalyMap<S>> = test
        .par_iter()
        .enumerate()
        .map(|(i, sample)| -> Result<AnomalyMap<S>, EvalError> {
            let rec = recon.reconstruct(i, &sample.image)?;
            let diff = delta(settings.delta, &sample.image, &rec)?;
            Ok(mean_filter(&diff, &settings.smoothing)?)
        })
        .collect::<Result<_, _>>()?;
    let image_scores: Vec<f64> =
        maps.iter().map(|m| image_score(m, settings.reduction).to_f64_lossy()).collect();
    let labels: Vec<bool> = test.iter().map(|s| s.label).collect();
    let gt: Vec<_> = test.iter().map(|s| s.gt_mask.clone()).collect();

    let i_degenerate = all_equal(&image_scores);
    let i_auroc = if i_degenerate { 0.5 } else { auroc(&image_scores, &labels)? };
    let mut pixel_values = maps.iter().flat_map(|m| m.data().iter().map(|v| v.to_f64_lossy()));
    let first = pixel_values.next().unwrap_or(0.0);
    let p_degenerate = pixel_values.all(|v| v == first);
    let p_auroc = if p_degenerate {
        0.5
    } else if settings.per_image_pixel_pooling {
        pixel_auroc_per_image(&maps, &gt)?
    } else {
        pixel_auroc(&maps, &gt)?
    };
    Ok(MetricsReport {
        i_auroc,
        p_auroc,
        image_scores,
        labels,
        i_degenerate,
        p_degenerate,
        config_digest: config_digest.to_string(),
        seed,
    })
}

fn all_equal(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Everything needed to train and score one benchmark instance.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub benchmark: BenchmarkConfig,
    pub schedule: TrainSchedule,
    pub settings: EvalSettings,
}

/// Trains on the benchmark's clean images with its training corruption and
/// evaluates on the held-out test set. Returns the metrics, the trained
/// parameters, and the dataset used.
pub fn run_benchmark<S: Scalar>(
    run: &BenchmarkRun,
    net: &Network,
    seed: u64,
) -> Result<(MetricsReport, ParamVector<S>, SynthDataset<S>), EvalError> {
    let seeder = Seeder::new(seed);
    let dataset = synth_dataset::<S>(&run.benchmark, &seeder)?;
    let outcome = train(net, &dataset.train, &run.benchmark.train_corruption, &run.schedule, &seeder)?;
    let recon = NetReconstructor { net, params: &outcome.params };
    let digest = config_digest(&format!("{:?}|{:?}|{:?}", run.benchmark, run.schedule, run.settings));
    let report = evaluate(&recon, &dataset.test, &run.settings, &digest, seed)?;
    Ok((report, outcome.params, dataset))
}

/// Cheap stable fingerprint of the effective configuration.
pub fn config_digest(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{h:016x}")
}

/// One arm of the ablation: per-seed metrics plus their mean and spread.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationArm {
    pub p_aurocs: Vec<f64>,
    pub i_aurocs: Vec<f64>,
    pub mean_p_auroc: f64,
    pub std_p_auroc: f64,
}

impl AblationArm {
    fn from_metrics(metrics: &[MetricsReport]) -> Self {
        let p: Vec<f64> = metrics.iter().map(|m| m.p_auroc).collect();
        let i: Vec<f64> = metrics.iter().map(|m| m.i_auroc).collect();
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let var = if p.len() > 1 {
            p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (p.len() - 1) as f64
        } else {
            0.0
        };
        Self { p_aurocs: p, i_aurocs: i, mean_p_auroc: mean, std_p_auroc: var.sqrt() }
    }
}

/// Paired comparison of training with the configured noise range against
/// the zero-noise baseline, over a list of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub with_noise: AblationArm,
    pub without_noise: AblationArm,
    /// mean P-AUROC(with) - mean P-AUROC(without).
    pub improvement: f64,
}

impl AblationReport {
    pub fn summary(&self) -> String {
        format!(
            "with noise:    P-AUROC {:.4} +- {:.4}\nwithout noise: P-AUROC {:.4} +- {:.4}\nimprovement:   {:+.4}\n",
            self.with_noise.mean_p_auroc,
            self.with_noise.std_p_auroc,
            self.without_noise.mean_p_auroc,
            self.without_noise.std_p_auroc,
            self.improvement
        )
    }
}

/// Trains both arms per seed on identical datasets; only the noise range
/// differs between the arms.
pub fn ablation<S: Scalar>(
    run: &BenchmarkRun,
    net: &Network,
    seeds: &[u64],
) -> Result<AblationReport, EvalError> {
    if seeds.len() < 2 {
        return Err(EvalError::Config("ablation needs at least 2 seeds".into()));
    }
    let mut with_noise = Vec::with_capacity(seeds.len());
    let mut without_noise = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (report, _, _) = run_benchmark::<S>(run, net, seed)?;
        with_noise.push(report);
        let mut baseline = run.clone();
        baseline.schedule.loss = TrainLoss::Dae;
        let (report, _, _) = run_benchmark::<S>(&baseline, net, seed)?;
        without_noise.push(report);
    }
    let with_arm = AblationArm::from_metrics(&with_noise);
    let without_arm = AblationArm::from_metrics(&without_noise);
    let improvement = with_arm.mean_p_auroc - without_arm.mean_p_auroc;
    Ok(AblationReport {
        seeds: seeds.to_vec(),
        with_noise: with_arm,
        without_noise: without_arm,
        improvement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Mask;
    use crate::net::{Activation, LayerSpec, NetworkConfig};

    struct OracleReconstructor<'a, S> {
        clean: &'a [Image<S>],
    }

    impl<S: Scalar> Reconstructor<S> for OracleReconstructor<'_, S> {
        fn reconstruct(&self, index: usize, _image: &Image<S>) -> Result<Image<S>, EvalError> {
            Ok(self.clean[index].clone())
        }
    }

    fn small_benchmark() -> BenchmarkConfig {
        BenchmarkConfig {
            train_count: 4,
            test_count: 24,
            anomalous_count: 12,
            height: 32,
            width: 32,
            ..Default::default()
        }
    }

    fn identity_net(d_side: usize) -> (Network, ParamVector<f64>) {
        let d = d_side * d_side;
        let net = Network::new(NetworkConfig {
            input: (d_side, d_side, 1),
            layers: vec![LayerSpec::Dense { out: d }, LayerSpec::Activation(Activation::Identity)],
        })
        .unwrap();
        let mut params = ParamVector::zeros(net.param_len());
        for i in 0..d {
            params.values_mut()[i * d + i] = 1.0;
        }
        (net, params)
    }

    #[test]
    fn identity_network_reports_degenerate_half() {
        let cfg = BenchmarkConfig { sensor_noise: 0.0, ..small_benchmark() };
        let ds = synth_dataset::<f64>(&cfg, &Seeder::new(2)).unwrap();
        let (net, params) = identity_net(32);
        let recon = NetReconstructor { net: &net, params: &params };
        let report = evaluate(&recon, &ds.test, &EvalSettings::default(), "digest", 2).unwrap();
        assert!(report.i_degenerate && report.p_degenerate);
        assert_eq!((report.i_auroc, report.p_auroc), (0.5, 0.5));
    }

    #[test]
    fn oracle_reconstructor_hits_near_perfect_pixel_auroc() {
        // The stub returns the noise-free clean image, so this check runs
        // at a low acquisition-noise level where that reference is sharp.
        let cfg = BenchmarkConfig {
            train_count: 2,
            test_count: 24,
            anomalous_count: 12,
            sensor_noise: 0.02,
            ..Default::default()
        };
        let ds = synth_dataset::<f64>(&cfg, &Seeder::new(3)).unwrap();
        let recon = OracleReconstructor { clean: &ds.clean_test };
        // Light smoothing: heavy kernels bleed response past the mask edge
        // and depress the pixel ranking.
        let settings = EvalSettings {
            delta: DeltaKind::Mse,
            smoothing: crate::anomaly::SmoothingSpec { kernel: 3, repeats: 1 },
            ..Default::default()
        };
        let report = evaluate(&recon, &ds.test, &settings, "digest", 3).unwrap();
        assert!(report.p_auroc >= 0.99, "P-AUROC {}", report.p_auroc);
        assert!(report.i_auroc >= 0.99, "I-AUROC {}", report.i_auroc);
    }

    #[test]
    fn evaluate_is_deterministic() {
        let ds = synth_dataset::<f64>(&small_benchmark(), &Seeder::new(4)).unwrap();
        let recon = OracleReconstructor { clean: &ds.clean_test };
        let a = evaluate(&recon, &ds.test, &EvalSettings::default(), "digest", 4).unwrap();
        let b = evaluate(&recon, &ds.test, &EvalSettings::default(), "digest", 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_test_set_rejected() {
        let (net, params) = identity_net(16);
        let recon = NetReconstructor { net: &net, params: &params };
        let empty: Vec<LabeledSample<f64>> = Vec::new();
        assert!(evaluate(&recon, &empty, &EvalSettings::default(), "d", 0).is_err());
    }

    #[test]
    fn labeled_sample_invariant_enforced() {
        let img = Image::constant(16, 16, 1, 0.5f64);
        let empty = Mask::zeros(16, 16);
        let sample = LabeledSample::new(img.clone(), empty).unwrap();
        assert!(!sample.label);
        let mut positive = Mask::zeros(16, 16);
        positive.set(3, 3, 1.0);
        let sample = LabeledSample::new(img, positive).unwrap();
        assert!(sample.label);
    }

    #[test]
    fn ablation_arms_identical_when_both_noise_free() {
        // With a zero noise range the two arms run the same pipeline.
        let net = Network::new(NetworkConfig::dense_autoencoder(
            (32, 32, 1),
            &[16],
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap();
        let mut benchmark = small_benchmark();
        benchmark.train_corruption.noise_sigma_max = 0.0;
        let run = BenchmarkRun {
            benchmark,
            schedule: TrainSchedule { steps: 12, batch_size: 1, log_every: 6, ..Default::default() },
            settings: EvalSettings::default(),
        };
        let report = ablation::<f64>(&run, &net, &[1, 2]).unwrap();
        assert_eq!(report.with_noise.p_aurocs, report.without_noise.p_aurocs);
        assert_eq!(report.improvement, 0.0);
    }

    #[test]
    fn ablation_requires_two_seeds() {
        let net = Network::new(NetworkConfig::dense_autoencoder(
            (32, 32, 1),
            &[8],
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap();
        let run = BenchmarkRun {
            benchmark: small_benchmark(),
            schedule: TrainSchedule { steps: 1, ..Default::default() },
            settings: EvalSettings::default(),
        };
        assert!(ablation::<f64>(&run, &net, &[1]).is_err());
    }
}
