//! Synthetic benchmark and detection metrics.

mod auroc;
mod dataset;
mod run;

pub use auroc::{auroc, pixel_auroc, pixel_auroc_per_image};
pub use dataset::{normal_image, synth_dataset, BenchmarkConfig, DatasetManifest, SynthDataset};
pub use run::{
    ablation, config_digest, evaluate, run_benchmark, AblationArm, AblationReport, BenchmarkRun,
    EvalSettings, MetricsReport, NetReconstructor, Reconstructor,
};

use thiserror::Error;

use crate::image::{Image, Mask, ShapeError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric undefined: need both classes, got {positives} positive / {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score/label lengths differ: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Corruption(#[from] crate::corruption::CorruptionError),
    #[error(transparent)]
    Net(#[from] crate::net::NetError),
    #[error(transparent)]
    Anomaly(#[from] crate::anomaly::AnomalyError),
}

/// A test instance: the image, its binary label, and the ground-truth mask
/// (all zeros for normal samples). The label is defined by the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<S> {
    pub image: Image<S>,
    pub label: bool,
    pub gt_mask: Mask<S>,
}

impl<S: Scalar> LabeledSample<S> {
    pub fn new(image: Image<S>, gt_mask: Mask<S>) -> Result<Self, EvalError> {
        if image.height() != gt_mask.height() || image.width() != gt_mask.width() {
            return Err(ShapeError::Mismatch(
                image.height(), image.width(), image.channels(),
                gt_mask.height(), gt_mask.width(), 1,
            )
            .into());
        }
        let label = gt_mask.any_positive();
        Ok(Self { image, label, gt_mask })
    }
}
