use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bce_sum_and_grad, BmdLoss};
use super::model::{Model, ModelSpec};
use super::preprocess::preprocess;
use crate::link::Link;
use crate::numerics::{adam_step, AdamHyper, AdamState};
use crate::rng::{seeded, stream, ChaCha8Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Total number of training grids. The last batch is shortened so that
    /// exactly this many are drawn.
    pub samples: u64,
    pub adam: AdamHyper,
    /// Eb/N0 range in dB, sampled uniformly per grid.
    pub ebno_db: (f64, f64),
    pub seed: u64,
}

impl TrainConfig {
    pub fn iterations(&self) -> u64 {
        self.samples.div_ceil(self.batch_size as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let (lo, hi) = self.ebno_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("invalid Eb/N0 range [{lo}, {hi}]")));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.adam.lr)));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iter: u64,
    /// BMD rate `1 - mean BCE` of the batch, before the update.
    pub rate: f64,
    pub mean_bce: f64,
    pub ebno_lo: f64,
    pub ebno_hi: f64,
    pub seed: u64,
    pub batch: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub log: Vec<LogRow>,
    pub samples_used: u64,
}

/// Training stopped early. `last_good` holds the parameters from before the
/// failing update.
#[derive(Clone, Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub last_good: Model<f32>,
    pub log: Vec<LogRow>,
}

impl From<TrainFailure> for Error {
    fn from(f: TrainFailure) -> Self {
        f.error
    }
}

fn check_compatible(model: &Model<f32>, link: &Link) -> Result<()> {
    let d = link.domain();
    if model.spec.bits_per_symbol != link.bits_per_symbol() || model.spec.num_rx != d.num_rx {
        return Err(Error::Config(format!(
            "model expects K={} N_rx={}, link has K={} N_rx={}",
            model.spec.bits_per_symbol,
            model.spec.num_rx,
            link.bits_per_symbol(),
            d.num_rx
        )));
    }
    Ok(())
}

fn draw_ebno(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Minimizes mean BCE of the trainable layers with Adam. Frozen layers are
/// neither differentiated nor updated. A zero sample budget returns the model
/// unchanged.
pub fn train(
    mut model: Model<f32>,
    link: &Link,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&LogRow),
) -> core::result::Result<TrainOutcome, TrainFailure> {
    let setup = cfg.validate().and_then(|_| check_compatible(&model, link)).and_then(|_| {
        if model.layers.iter().any(|l| l.trainable) {
            Ok(())
        } else {
            Err(Error::Usage("no trainable layers".into()))
        }
    });
    if let Err(error) = setup {
        return Err(TrainFailure { error, last_good: model, log: Vec::new() });
    }
    let grid = &link.domain().grid;
    let n_bits = link.code().n();
    let flags = model.tensor_trainable_flags();
    let mut adam = AdamState::new(cfg.adam, model.tensors());
    let mut rng = seeded(cfg.seed, stream::DATA);
    let mut log = Vec::with_capacity(cfg.iterations() as usize);
    let mut remaining = cfg.samples;

    for iter in 0..cfg.iterations() {
        let m = remaining.min(cfg.batch_size as u64) as usize;
        remaining -= m as u64;
        let step = (|| -> Result<(BmdLoss, Model<f32>)> {
            let mut grads = model.zeros_like();
            let scale = 1.0 / (m * n_bits) as f64;
            let mut sum = 0.0;
            for _ in 0..m {
                let ebno = draw_ebno(&mut rng, cfg.ebno_db);
                let block = link.transmit(ebno, &mut rng)?;
                let trace = model.forward_trace(&preprocess(&block.rx))?;
                let (s, g) = bce_sum_and_grad(&trace.output, &block.coded, grid, scale)?;
                sum += s;
                model.backward(&trace, &g, &mut grads, false)?;
            }
            Ok((BmdLoss::from_sum(sum, m * n_bits), grads))
        })();
        let (loss, grads) = match step {
            Ok(v) => v,
            Err(error) => return Err(TrainFailure { error, last_good: model, log }),
        };
        let row = LogRow {
            iter,
            rate: loss.rate,
            mean_bce: loss.mean_bce,
            ebno_lo: cfg.ebno_db.0,
            ebno_hi: cfg.ebno_db.1,
            seed: cfg.seed,
            batch: m,
        };
        observer(&row);
        log.push(row);
        if !loss.rate.is_finite() {
            let error = Error::NonFinite(format!("loss at iteration {iter}"));
            return Err(TrainFailure { error, last_good: model, log });
        }
        let grad_refs = grads.tensors();
        if let Err(error) = adam_step(&mut model.tensors_mut(), &grad_refs, &flags, &mut adam) {
            return Err(TrainFailure { error, last_good: model, log });
        }
    }
    Ok(TrainOutcome { model, log, samples_used: cfg.samples })
}

/// Trains a freshly initialized model from scratch.
pub fn train_source(
    spec: &ModelSpec,
    link: &Link,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&LogRow),
) -> core::result::Result<TrainOutcome, TrainFailure> {
    let model = Model::new(spec, &mut seeded(cfg.seed, stream::INIT)).map_err(|error| TrainFailure {
        error,
        last_good: Model { spec: spec.clone(), layers: Vec::new(), extended: false },
        log: Vec::new(),
    })?;
    train(model, link, cfg, observer)
}
