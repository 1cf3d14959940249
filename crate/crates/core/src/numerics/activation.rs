use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place<T: Scalar>(t: &mut Tensor<T>) {
    for x in t.data_mut() {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
}

/// Upstream gradient masked by `x > 0`; the subgradient at zero is zero.
///
/// `reference` may be either the ReLU input or its output: both are positive
/// at exactly the same positions.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, reference: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.shape() != reference.shape() {
        return Err(Error::Shape("relu_backward shapes differ".into()));
    }
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(reference.data()) {
        if !(x > T::zero()) {
            *gv = T::zero();
        }
    }
    Ok(g)
}
