use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::surgery::{add_resnet_block, set_trainable, transplant, FreezePolicy};
use crate::link::Link;
use crate::receiver::{train, train_source, LogRow, Model, ModelSpec, TrainConfig, TrainFailure, TrainOutcome};
use crate::rng::{seeded, stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    FineTuning,
    FineTuningPlus,
    FeatureExtraction,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::FineTuning, Technique::FineTuningPlus, Technique::FeatureExtraction];

    pub fn name(self) -> &'static str {
        match self {
            Technique::FineTuning => "fine_tuning",
            Technique::FineTuningPlus => "fine_tuning_plus",
            Technique::FeatureExtraction => "feature_extraction",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| Error::Config(format!("unknown technique `{s}`")))
    }

    pub fn adds_block(self) -> bool {
        self != Technique::FineTuning
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub technique: Technique,
    /// Layers frozen by fine tuning plus.
    pub freeze_k: usize,
    /// Target budget as a fraction of `source_samples`.
    pub alpha: f64,
    pub source_samples: u64,
    /// Target training settings; `samples` is replaced by the scaled budget.
    pub train: TrainConfig,
}

/// `round(alpha * source_samples)`.
pub fn scaled_samples(source_samples: u64, alpha: f64) -> Result<u64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} is outside [0, 1]")));
    }
    Ok(libm::round(alpha * source_samples as f64) as u64)
}

/// Builds the target model: transplant, optional extra block, freezing.
pub fn prepare(source: &Model<f32>, bits_per_symbol: usize, technique: Technique, freeze_k: usize, seed: u64) -> Result<(Model<f32>, Vec<String>)> {
    let mut rng = seeded(seed, stream::SURGERY);
    let (mut model, delta) = transplant(source, bits_per_symbol, &mut rng);
    if technique.adds_block() {
        add_resnet_block(&mut model, &mut rng)?;
    }
    let policy = match technique {
        Technique::FineTuning => FreezePolicy::AllTrainable,
        Technique::FineTuningPlus => FreezePolicy::FreezeFirstK(freeze_k),
        Technique::FeatureExtraction => FreezePolicy::FreezeAllTransferred,
    };
    set_trainable(&mut model, policy)?;
    Ok((model, delta))
}

/// Adapts a source model to the target link. A zero budget returns the
/// prepared model untouched.
pub fn adapt(
    source: &Model<f32>,
    link: &Link,
    cfg: &AdaptConfig,
    observer: &mut dyn FnMut(&LogRow),
) -> core::result::Result<TrainOutcome, TrainFailure> {
    let fail = |error| TrainFailure { error, last_good: source.clone(), log: Vec::new() };
    let samples = scaled_samples(cfg.source_samples, cfg.alpha).map_err(fail)?;
    let (model, delta) =
        prepare(source, link.bits_per_symbol(), cfg.technique, cfg.freeze_k, cfg.train.seed).map_err(fail)?;
    for d in &delta {
        log::info!("{d}");
    }
    if samples == 0 {
        return Ok(TrainOutcome { model, log: Vec::new(), samples_used: 0 });
    }
    train(model, link, &TrainConfig { samples, ..cfg.train.clone() }, observer)
}

/// Trains from scratch on the target domain with an `alpha`-scaled budget.
pub fn without_tl(
    spec: &ModelSpec,
    link: &Link,
    source_samples: u64,
    alpha: f64,
    train_cfg: &TrainConfig,
    observer: &mut dyn FnMut(&LogRow),
) -> core::result::Result<TrainOutcome, TrainFailure> {
    let fail = |error| TrainFailure { error, last_good: Model { spec: spec.clone(), layers: Vec::new(), extended: false }, log: Vec::new() };
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(fail(Error::Config(format!("alpha {alpha} is outside (0, 1]"))));
    }
    let samples = scaled_samples(source_samples, alpha).map_err(fail)?;
    train_source(spec, link, &TrainConfig { samples, ..train_cfg.clone() }, observer)
}

/// The source model as used on the target domain without any update.
pub fn model_transfer(source: &Model<f32>, bits_per_symbol: usize, seed: u64) -> Model<f32> {
    transplant(source, bits_per_symbol, &mut seeded(seed, stream::SURGERY)).0
}
