use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{ConvLayer, Scalar};
use crate::receiver::{resnet_name, Layer, LayerSlot, Model, ResBlock, OUTPUT_CONV};
use crate::{Error, Result};

/// Appends one freshly initialized `width_res` block directly before the
/// output convolution. Only one extension is defined.
pub fn add_resnet_block<T: Scalar, R: Rng + ?Sized>(model: &mut Model<T>, rng: &mut R) -> Result<()> {
    if model.extended {
        return Err(Error::Usage("model already carries the extra residual block".into()));
    }
    let spec = &model.spec;
    let ch = model.layers[model.layers.len() - 1].layer.in_channels();
    let block = ResBlock::new(ch, spec.width_res, spec.kernel, spec.dilation, rng);
    if block.out_channels() != ch {
        return Err(Error::Config(format!("output conv expects {ch} channels but blocks produce {}", spec.width_res)));
    }
    let at = model.layers.len() - 1;
    model.spec.num_blocks += 1;
    let name = resnet_name(model.spec.num_blocks);
    model.layers.insert(at, LayerSlot { name, layer: Layer::Res(block), trainable: true, fresh: true });
    model.extended = true;
    Ok(())
}

/// Copies a source model for use in a target domain. Every layer is marked as
/// transferred; if the target uses a different number of bits per symbol the
/// output convolution cannot be reused and is re-initialized instead.
/// Returns the adjusted model and a description of what changed.
pub fn transplant<T: Scalar, R: Rng + ?Sized>(
    source: &Model<T>,
    bits_per_symbol: usize,
    rng: &mut R,
) -> (Model<T>, Vec<String>) {
    let mut model = source.clone();
    for l in &mut model.layers {
        l.fresh = false;
    }
    let mut delta = Vec::new();
    if bits_per_symbol != source.spec.bits_per_symbol {
        delta.push(format!(
            "{OUTPUT_CONV} re-initialized: {} -> {bits_per_symbol} output channels",
            source.spec.bits_per_symbol
        ));
        model.spec.bits_per_symbol = bits_per_symbol;
        let (kernel, dilation) = (model.spec.kernel, model.spec.dilation);
        let slot = model.layers.last_mut().expect("model has layers");
        let ch = slot.layer.in_channels();
        slot.layer = Layer::Conv(ConvLayer::glorot(ch, bits_per_symbol, kernel, dilation, rng));
        slot.fresh = true;
    }
    (model, delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezePolicy {
    AllTrainable,
    /// Freeze the first `k` layers.
    FreezeFirstK(usize),
    /// Train only freshly initialized layers and the output convolution.
    FreezeAllTransferred,
}

/// Sets the trainable flags. A freshly initialized output convolution is
/// trainable under every policy.
pub fn set_trainable<T: Scalar>(model: &mut Model<T>, policy: FreezePolicy) -> Result<()> {
    let n = model.layers.len();
    if let FreezePolicy::FreezeFirstK(k) = policy {
        if k > n {
            return Err(Error::Usage(format!("cannot freeze {k} of {n} layers")));
        }
    }
    for (i, l) in model.layers.iter_mut().enumerate() {
        let is_output = i == n - 1;
        l.trainable = match policy {
            FreezePolicy::AllTrainable => true,
            FreezePolicy::FreezeFirstK(k) => i >= k || (is_output && l.fresh),
            FreezePolicy::FreezeAllTransferred => l.fresh || is_output,
        };
    }
    Ok(())
}
