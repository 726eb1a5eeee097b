//! Training loops: standard ERM and adversarial training (first- or
//! second-order), both deterministic given a seed.
//!
//! Adversarial training regenerates the perturbed batch against the
//! *current* model before every SGD step (Madry-style inner maximization).
//! Per-batch attack generation fans out across the rayon pool; the model is
//! read-only during generation, and results are collected in example order
//! so parallelism never changes the trajectory.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{fgsm, pgd, soae, AttackConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{FeedForwardModel, LabeledExample, Velocity};

/// Which generator supplies the adversarial batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Fgsm,
    Pgd,
    Soae,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Pgd => "pgd",
            AttackKind::Soae => "soae",
        }
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fgsm" => Ok(AttackKind::Fgsm),
            "pgd" => Ok(AttackKind::Pgd),
            "soae" => Ok(AttackKind::Soae),
            other => Err(Error::InvalidConfig(format!(
                "unknown attack '{other}' (expected fgsm, pgd, or soae)"
            ))),
        }
    }
}

/// Run one attack, returning only the adversarial input.
pub fn generate_adversarial(
    model: &FeedForwardModel,
    example: &LabeledExample,
    kind: AttackKind,
    config: &AttackConfig,
) -> Result<crate::attacks::AttackOutcome> {
    match kind {
        AttackKind::Fgsm => fgsm(model, &example.x, example.y, config.epsilon),
        AttackKind::Pgd => pgd(model, &example.x, example.y, config),
        AttackKind::Soae => soae(model, &example.x, example.y, config),
    }
}

/// Training hyperparameters. The paper-scale schedule (300 epochs, batch
/// 128, lr 0.1, momentum 0.9, weight decay 3e-4) is shrunk to 20 epochs by
/// default; everything else matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Hidden layer widths of the MLP, e.g. [256] for input-256-classes.
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// When set, every batch is replaced by its adversarial counterpart.
    pub attack: Option<(AttackKind, AttackConfig)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 128,
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 3e-4,
            hidden: vec![256],
            seed: 0,
            attack: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lr must be finite and >= 0, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if let Some((_, attack)) = &self.attack {
            attack.validate()?;
        }
        Ok(())
    }
}

/// Per-epoch measurements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub clean_accuracy: f64,
    pub mean_loss: f64,
    pub seconds: f64,
}

/// Training-run record: one entry per epoch plus the checkpoint location
/// once the caller has written one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub checkpoint: Option<PathBuf>,
}

/// Minibatch SGD with momentum on the clean examples.
pub fn train_standard(dataset: &Dataset, config: &TrainConfig) -> Result<(FeedForwardModel, TrainReport)> {
    let mut cfg = config.clone();
    cfg.attack = None;
    train(dataset, &cfg)
}

/// Adversarial training: the configured attack must be present.
pub fn train_adversarial(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(FeedForwardModel, TrainReport)> {
    if config.attack.is_none() {
        return Err(Error::InvalidConfig(
            "train_adversarial needs an attack config".into(),
        ));
    }
    train(dataset, config)
}

/// Shared loop. The shuffle stream is seeded independently of the weight
/// initialization so the two never alias.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(FeedForwardModel, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }

    let mut sizes = vec![dataset.input_dim];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(dataset.num_classes);
    let mut model = FeedForwardModel::new_mlp(&sizes, config.seed)?;
    let mut velocity = Velocity::zeros_for(&model);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let started = Instant::now();
        indices.shuffle(&mut shuffle_rng);
        for chunk in indices.chunks(config.batch_size) {
            let batch: Vec<LabeledExample> = match &config.attack {
                None => chunk.iter().map(|&i| dataset.examples[i].clone()).collect(),
                Some((kind, attack)) => {
                    let model_ref = &model;
                    chunk
                        .par_iter()
                        .map(|&i| {
                            let ex = &dataset.examples[i];
                            generate_adversarial(model_ref, ex, *kind, attack).map(|out| {
                                LabeledExample {
                                    x: out.adversarial,
                                    y: ex.y,
                                }
                            })
                        })
                        .collect::<Result<Vec<_>>>()?
                }
            };
            model.sgd_step(
                &batch,
                config.lr,
                config.momentum,
                config.weight_decay,
                &mut velocity,
            )?;
        }

        // end-of-epoch pass over the clean training set
        let mut correct = 0usize;
        let mut loss_sum = 0.0;
        for ex in &dataset.examples {
            if model.predict(&ex.x)? == ex.y {
                correct += 1;
            }
            loss_sum += model.loss(&ex.x, ex.y)?;
        }
        epochs.push(EpochStats {
            clean_accuracy: correct as f64 / dataset.len() as f64,
            mean_loss: loss_sum / dataset.len() as f64,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    Ok((
        model,
        TrainReport {
            epochs,
            checkpoint: None,
        },
    ))
}
