use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates for a fixed, ordered list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub hyper: AdamHyper,
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(hyper: AdamHyper, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first: Vec<_> = params.into_iter().map(Tensor::zeros_like).collect();
        let second = first.clone();
        Self { hyper, first, second, step: 0 }
    }
}

/// One bias-corrected Adam update.
///
/// Tensors whose `active` flag is false are skipped entirely: neither the
/// parameter nor its moments are touched. Any non-finite gradient in an active
/// tensor aborts the step before anything is modified.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    active: &[bool],
    state: &mut AdamState<T>,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || active.len() != n || state.first.len() != n {
        return Err(Error::Shape(format!(
            "adam: {n} params, {} grads, {} flags, {} moment slots",
            grads.len(),
            active.len(),
            state.first.len()
        )));
    }
    for i in 0..n {
        if params[i].shape() != grads[i].shape() || params[i].shape() != state.first[i].shape() {
            return Err(Error::Shape(format!("adam: tensor {i} shapes disagree")));
        }
        if active[i] {
            if let Some(j) = grads[i].data().iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of parameter tensor {i} at index {j}")));
            }
        }
    }
    state.step += 1;
    let h = state.hyper;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(h.beta1, t as f64);
    let c2 = 1.0 - libm::pow(h.beta2, t as f64);
    let (b1, b2) = (T::of(h.beta1), T::of(h.beta2));
    let (ob1, ob2) = (T::of(1.0 - h.beta1), T::of(1.0 - h.beta2));
    let step_size = T::of(h.lr / c1);
    let inv_c2 = T::of(1.0 / c2);
    let eps = T::of(h.eps);
    for i in 0..n {
        if !active[i] {
            continue;
        }
        let p = params[i].data_mut();
        let g = grads[i].data();
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for k in 0..p.len() {
            m[k] = b1 * m[k] + ob1 * g[k];
            v[k] = b2 * v[k] + ob2 * g[k] * g[k];
            p[k] -= step_size * m[k] / ((v[k] * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}
