//! Neural SIMO receiver: model, input mapping, loss and training.

mod loss;
mod model;
mod preprocess;
mod probe;
mod train;

pub use loss::{bce_bits, bce_sum_and_grad, bmd_loss, data_llrs, sigmoid, softplus, BmdLoss};
pub use model::{resnet_name, Layer, LayerKind, LayerSlot, Model, ModelSpec, ResBlock, Trace, INPUT_CONV, OUTPUT_CONV};
pub use preprocess::{preprocess, reassemble};
pub use probe::ModelProbe;
pub use train::{train, train_source, LogRow, TrainConfig, TrainFailure, TrainOutcome};
