//! Self-supervised structural anomaly detection with a noise-preserving
//! reconstruction autoencoder.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`corruption`] — procedural corruption synthesis: occlusion shapes,
//!   texture fills, opacity mixing, and symmetric-noise training pairs;
//! * [`net`] — a small dense/convolutional reconstruction network with
//!   hand-derived gradients, its training losses, and Adam;
//! * [`anomaly`] — difference maps (MSE / SSIM / GMS), iterated mean-filter
//!   smoothing, image-level scores, and threshold segmentation;
//! * [`theory`] — Monte-Carlo verification of the second-order expansion of
//!   the symmetric-noise loss (identity-anchored Jacobian penalty, remainder
//!   order, moment identities, idempotency);
//! * [`eval`] — synthetic benchmark generation, rank-based AUROC at image
//!   and pixel level, and the with/without-noise ablation harness.
//!
//! All numeric code is generic over the scalar type via [`scalar::Scalar`];
//! `f64` aliases for the main value types live at the crate root.

pub mod anomaly;
pub mod corruption;
pub mod eval;
pub mod image;
pub mod io;
pub mod linalg;
pub mod net;
pub mod rng;
pub mod theory;
pub mod scalar;

pub use image::{Image, Mask};
pub use scalar::Scalar;

/// Sizes the global worker pool used for per-image evaluation and
/// Monte-Carlo chunks. Chunked reductions merge in fixed order, so results
/// are identical for any worker count. Returns an error if a pool already
/// exists; later calls can safely ignore it.
pub fn init_workers(workers: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build_global()
}

/// Concrete aliases for the common double-precision pipeline.
pub type ImageF64 = Image<f64>;
pub type MaskF64 = Mask<f64>;
pub type ImageF32 = Image<f32>;
pub type MaskF32 = Mask<f32>;
