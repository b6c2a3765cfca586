//! Training loop: corruption pairs in, Adam steps out, fully seed-driven.

use super::adam::adam_step_in_place;
use super::{batch_gradient, GradSample, LossKind, NetError, Network, ParamVector, TrainState};
use crate::corruption::{make_training_pair, CorruptionConfig, TrainingPair};
use crate::image::Image;
use crate::rng::Seeder;
use crate::scalar::Scalar;
use rand::Rng;

/// Which objective the loop optimizes. `Dae` trains on noise-free pairs
/// regardless of the configured sigma range; `Fae` keeps the symmetric
/// noise drawn by the corruption model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainLoss {
    Fae,
    Dae,
    Weighted { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: TrainLoss,
    /// Window size for loss logging; one row per window.
    pub log_every: usize,
    /// Collect parameter snapshots every this many steps.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 2,
            learning_rate: 1e-3,
            loss: TrainLoss::Fae,
            log_every: 100,
            checkpoint_every: None,
        }
    }
}

/// One row of the training log: windowed mean loss (per-element form) and
/// mean drawn sigma over the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub loss: f64,
    pub sigma_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub step: u64,
    pub params: ParamVector<S>,
    /// Windowed mean training loss at snapshot time.
    pub window_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<S> {
    pub params: ParamVector<S>,
    pub log: Vec<TrainLogRow>,
    pub checkpoints: Vec<Checkpoint<S>>,
}

/// Runs the loop: draw corruption pairs, take Adam steps, log windowed
/// losses. Pure function of (seed, config, data); a non-finite loss aborts
/// with the failing step index.
pub fn train<S: Scalar>(
    net: &Network,
    images: &[Image<S>],
    corruption: &CorruptionConfig,
    schedule: &TrainSchedule,
    seeder: &Seeder,
) -> Result<TrainOutcome<S>, NetError> {
    if images.is_empty() {
        return Err(NetError::NoTrainingData);
    }
    corruption.validate()?;
    let effective_corruption = match schedule.loss {
        TrainLoss::Dae => CorruptionConfig { noise_sigma_max: 0.0, ..corruption.clone() },
        _ => corruption.clone(),
    };
    let params = net.init_params::<S>(&mut seeder.stream("init"));
    let mut state = TrainState::new(params, S::cst(schedule.learning_rate), seeder.root());
    let mut data_rng = seeder.stream("data");
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    let mut window_loss = 0.0f64;
    let mut window_sigma = 0.0f64;
    let mut window_n = 0usize;
    let mut last_window_mean = f64::NAN;

    for step in 0..schedule.steps {
        let mut pairs: Vec<TrainingPair<S>> = Vec::with_capacity(schedule.batch_size);
        for _ in 0..schedule.batch_size.max(1) {
            let img = &images[data_rng.random_range(0..images.len())];
            pairs.push(make_training_pair(img, &effective_corruption, &mut data_rng)?);
        }
        let kind = match schedule.loss {
            TrainLoss::Weighted { lambda } => LossKind::Weighted { lambda: S::cst(lambda) },
            _ => LossKind::Dae,
        };
        let batch: Vec<GradSample<'_, S>> = pairs
            .iter()
            .map(|p| GradSample {
                input: p.input.data(),
                target: p.target.data(),
                mask: Some(&p.mask),
            })
            .collect();
        let (grad, loss) = match batch_gradient(net, &state.params, &batch, kind) {
            Ok(ok) => ok,
            Err(NetError::NonFinite { .. } | NetError::NonFiniteGradient) => {
                return Err(NetError::Diverged { step })
            }
            Err(e) => return Err(e),
        };
        let loss = loss.to_f64_lossy();
        if !loss.is_finite() {
            return Err(NetError::Diverged { step });
        }
        adam_step_in_place(&mut state, &grad).map_err(|_| NetError::Diverged { step })?;

        window_loss += loss;
        window_sigma += pairs.iter().map(|p| p.sigma.to_f64_lossy()).sum::<f64>() / pairs.len() as f64;
        window_n += 1;
        let window_done = window_n == schedule.log_every.max(1) || step + 1 == schedule.steps;
        if window_done {
            last_window_mean = window_loss / window_n as f64;
            log.push(TrainLogRow {
                step: (step + 1) as u64,
                loss: last_window_mean,
                sigma_mean: window_sigma / window_n as f64,
            });
            window_loss = 0.0;
            window_sigma = 0.0;
            window_n = 0;
        }
        if let Some(every) = schedule.checkpoint_every {
            if (step + 1) % every.max(1) == 0 {
                checkpoints.push(Checkpoint {
                    step: (step + 1) as u64,
                    params: state.params.clone(),
                    window_loss: if last_window_mean.is_finite() { last_window_mean } else { loss },
                });
            }
        }
    }
    Ok(TrainOutcome { params: state.params, log, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, NetworkConfig};

    fn constant_dataset(n: usize, value: f64) -> Vec<Image<f64>> {
        (0..n).map(|_| Image::constant(16, 16, 1, value)).collect()
    }

    fn tiny_net() -> Network {
        Network::new(NetworkConfig::dense_autoencoder(
            (16, 16, 1),
            &[24],
            Activation::Tanh,
            Activation::Identity,
        ))
        .unwrap()
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let net = tiny_net();
        let seeder = Seeder::new(42);
        let schedule = TrainSchedule { steps: 0, ..Default::default() };
        let out = train(&net, &constant_dataset(4, 0.5), &CorruptionConfig::default(), &schedule, &seeder)
            .unwrap();
        let init: ParamVector<f64> = net.init_params(&mut seeder.stream("init"));
        assert_eq!(out.params, init);
        assert!(out.log.is_empty());
    }

    #[test]
    fn constant_target_learned_by_bias_alone() {
        // Noise-free corrupted pairs against a constant target: the final
        // windowed loss must fall below 1e-3 per element (1e-3 * d in the
        // sum form).
        let net = tiny_net();
        let seeder = Seeder::new(7);
        let corruption = CorruptionConfig { noise_sigma_max: 0.0, ..Default::default() };
        let schedule = TrainSchedule {
            steps: 2000,
            batch_size: 2,
            learning_rate: 1e-2,
            loss: TrainLoss::Fae,
            log_every: 100,
            checkpoint_every: None,
        };
        let out = train(&net, &constant_dataset(3, 0.4), &corruption, &schedule, &seeder).unwrap();
        let final_loss = out.log.last().unwrap().loss;
        assert!(final_loss < 1e-3, "final windowed loss {final_loss}");
    }

    #[test]
    fn training_is_seed_deterministic() {
        let net = tiny_net();
        let corruption = CorruptionConfig::default();
        let schedule = TrainSchedule { steps: 30, log_every: 10, ..Default::default() };
        let images = constant_dataset(2, 0.6);
        let a = train(&net, &images, &corruption, &schedule, &Seeder::new(5)).unwrap();
        let b = train(&net, &images, &corruption, &schedule, &Seeder::new(5)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn dae_mode_logs_zero_sigma() {
        let net = tiny_net();
        let schedule = TrainSchedule { steps: 10, loss: TrainLoss::Dae, log_every: 5, ..Default::default() };
        let out = train(
            &net,
            &constant_dataset(2, 0.5),
            &CorruptionConfig::default(),
            &schedule,
            &Seeder::new(1),
        )
        .unwrap();
        assert!(out.log.iter().all(|row| row.sigma_mean == 0.0));
    }

    #[test]
    fn empty_dataset_rejected() {
        let net = tiny_net();
        let images: Vec<Image<f64>> = Vec::new();
        let out = train(
            &net,
            &images,
            &CorruptionConfig::default(),
            &TrainSchedule::default(),
            &Seeder::new(0),
        );
        assert!(matches!(out, Err(NetError::NoTrainingData)));
    }

    #[test]
    fn checkpoints_collected_at_interval() {
        let net = tiny_net();
        let schedule = TrainSchedule {
            steps: 40,
            log_every: 10,
            checkpoint_every: Some(10),
            ..Default::default()
        };
        let out = train(
            &net,
            &constant_dataset(2, 0.5),
            &CorruptionConfig::default(),
            &schedule,
            &Seeder::new(2),
        )
        .unwrap();
        assert_eq!(out.checkpoints.len(), 4);
        assert_eq!(out.checkpoints.last().unwrap().step, 40);
        assert_eq!(out.checkpoints.last().unwrap().params, out.params);
    }
}
