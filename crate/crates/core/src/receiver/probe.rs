use alloc::string::String;
use alloc::vec::Vec;

use super::loss::bce_sum_and_grad;
use super::model::{Layer, Model};
use crate::numerics::{GradProbe, ParamGroup, Tensor};
use crate::phy::GridConfig;

/// Mean BCE of a fixed set of examples as a function of every model
/// parameter, for finite-difference checks.
pub struct ModelProbe {
    pub model: Model<f64>,
    pub inputs: Vec<Tensor<f64>>,
    pub coded: Vec<Vec<u8>>,
    pub grid: GridConfig,
}

impl ModelProbe {
    fn total_bits(&self) -> usize {
        self.coded.iter().map(Vec::len).sum()
    }
}

fn kind_of(layer: &Layer<f64>, role: &str) -> &'static str {
    match layer {
        Layer::Conv(_) => "conv",
        Layer::Res(_) if role.starts_with("norm") => "layer_norm",
        Layer::Res(_) if role.starts_with("proj") => "projection",
        Layer::Res(_) => "conv",
    }
}

impl GradProbe for ModelProbe {
    fn groups(&self) -> Vec<ParamGroup> {
        let mut out = Vec::new();
        for slot in &self.model.layers {
            for (role, t) in slot.layer.tensors() {
                let mut layer = String::from(slot.name.as_str());
                layer.push('.');
                layer.push_str(role);
                out.push(ParamGroup { layer, kind: kind_of(&slot.layer, role), len: t.len() });
            }
        }
        out
    }

    fn get(&self, group: usize, index: usize) -> f64 {
        self.model.tensors()[group].data()[index]
    }

    fn set(&mut self, group: usize, index: usize, value: f64) {
        self.model.tensors_mut().swap_remove(group).data_mut()[index] = value;
    }

    fn loss(&self) -> f64 {
        let sum: f64 = self
            .inputs
            .iter()
            .zip(&self.coded)
            .map(|(x, c)| {
                let out = self.model.forward(x).expect("probe input shape");
                bce_sum_and_grad(&out, c, &self.grid, 0.0).expect("probe bits").0
            })
            .sum();
        sum / self.total_bits() as f64
    }

    fn gradient(&self) -> Vec<Vec<f64>> {
        let scale = 1.0 / self.total_bits() as f64;
        let mut grads = self.model.zeros_like();
        for (x, c) in self.inputs.iter().zip(&self.coded) {
            let trace = self.model.forward_trace(x).expect("probe input shape");
            let (_, g) = bce_sum_and_grad(&trace.output, c, &self.grid, scale).expect("probe bits");
            self.model.backward(&trace, &g, &mut grads, true).expect("probe backward");
        }
        grads.tensors().into_iter().map(|t| t.data().to_vec()).collect()
    }
}
