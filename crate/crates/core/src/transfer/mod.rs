//! Moving a trained receiver to a new domain: checkpoints, the extra residual
//! block, freezing, the adaptation techniques and parameter accounting.

mod adapt;
mod checkpoint;
mod params;
mod surgery;

pub use adapt::{adapt, model_transfer, prepare, scaled_samples, without_tl, AdaptConfig, Technique};
pub use checkpoint::{Checkpoint, Fingerprint, FingerprintPolicy, MAGIC};
pub use params::{count_params, AlternativeStructure, LayerCount, ParamReport, ReferenceCounts, REFERENCE_COUNTS};
pub use surgery::{add_resnet_block, set_trainable, transplant, FreezePolicy};
