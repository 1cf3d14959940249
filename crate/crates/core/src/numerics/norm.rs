use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Default epsilon added to the per-position variance.
pub const LAYER_NORM_EPS: f64 = 1e-9;

/// Normalization across the channel axis at every spatial position, with a
/// per-channel affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm<T> {
    pub num_channels: usize,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub epsilon: T,
}

/// Values kept by [`layer_norm_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct NormCache<T> {
    pub normalized: Tensor<T>,
    pub inv_std: Vec<T>,
}

impl<T: Scalar> LayerNorm<T> {
    /// `gamma = 1`, `beta = 0`.
    pub fn new(num_channels: usize) -> Self {
        let mut gamma = Tensor::zeros(&[num_channels]);
        gamma.fill(T::one());
        Self { num_channels, gamma, beta: Tensor::zeros(&[num_channels]), epsilon: T::of(LAYER_NORM_EPS) }
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    fn check(&self, input: &Tensor<T>) -> Result<usize> {
        match *input.shape() {
            [c, h, w] if c == self.num_channels => Ok(h * w),
            _ => Err(Error::Shape(format!(
                "layer norm expects [{}, H, W], got {:?}",
                self.num_channels,
                input.shape()
            ))),
        }
    }
}

pub fn layer_norm<T: Scalar>(input: &Tensor<T>, params: &LayerNorm<T>) -> Result<Tensor<T>> {
    layer_norm_forward(input, params).map(|(out, _)| out)
}

pub fn layer_norm_forward<T: Scalar>(input: &Tensor<T>, params: &LayerNorm<T>) -> Result<(Tensor<T>, NormCache<T>)> {
    let plane = params.check(input)?;
    let c = params.num_channels;
    let inv_c = T::one() / T::of(c as f64);
    let x = input.data();

    let mut mean = vec![T::zero(); plane];
    for ch in 0..c {
        for (m, &v) in mean.iter_mut().zip(&x[ch * plane..(ch + 1) * plane]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_c);

    let mut var = vec![T::zero(); plane];
    for ch in 0..c {
        for ((s, &v), &m) in var.iter_mut().zip(&x[ch * plane..(ch + 1) * plane]).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let inv_std: Vec<T> = var.iter().map(|&s| T::one() / (s * inv_c + params.epsilon).sqrt()).collect();

    let mut normalized = input.zeros_like();
    let mut out = input.zeros_like();
    {
        let xn = normalized.data_mut();
        let y = out.data_mut();
        for ch in 0..c {
            let g = params.gamma.data()[ch];
            let b = params.beta.data()[ch];
            let range = ch * plane..(ch + 1) * plane;
            for (((n, o), &v), (&m, &s)) in xn[range.clone()]
                .iter_mut()
                .zip(&mut y[range.clone()])
                .zip(&x[range])
                .zip(mean.iter().zip(&inv_std))
            {
                *n = (v - m) * s;
                *o = g * *n + b;
            }
        }
    }
    Ok((out, NormCache { normalized, inv_std }))
}

/// Returns the input gradient; parameter gradients are added into `acc`
/// (gamma, beta) when given.
pub fn layer_norm_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &NormCache<T>,
    params: &LayerNorm<T>,
    acc: Option<(&mut Tensor<T>, &mut Tensor<T>)>,
) -> Result<Tensor<T>> {
    let plane = params.check(grad_out)?;
    if grad_out.shape() != cache.normalized.shape() {
        return Err(Error::Shape("layer norm cache does not match gradient".into()));
    }
    let c = params.num_channels;
    let gy = grad_out.data();
    let xn = cache.normalized.data();

    if let Some((gg, gb)) = acc {
        for ch in 0..c {
            let range = ch * plane..(ch + 1) * plane;
            let mut sg = T::zero();
            let mut sb = T::zero();
            for (&g, &n) in gy[range.clone()].iter().zip(&xn[range]) {
                sg += g * n;
                sb += g;
            }
            gg.data_mut()[ch] += sg;
            gb.data_mut()[ch] += sb;
        }
    }

    let mut sum1 = vec![T::zero(); plane];
    let mut sum2 = vec![T::zero(); plane];
    for ch in 0..c {
        let gamma = params.gamma.data()[ch];
        let range = ch * plane..(ch + 1) * plane;
        for ((s1, s2), (&g, &n)) in sum1.iter_mut().zip(&mut sum2).zip(gy[range.clone()].iter().zip(&xn[range])) {
            let gx = g * gamma;
            *s1 += gx;
            *s2 += gx * n;
        }
    }
    let inv_c = T::one() / T::of(c as f64);
    let cf = T::of(c as f64);
    let mut grad_in = grad_out.zeros_like();
    let gi = grad_in.data_mut();
    for ch in 0..c {
        let gamma = params.gamma.data()[ch];
        let range = ch * plane..(ch + 1) * plane;
        for (p, (o, (&g, &n))) in gi[range.clone()].iter_mut().zip(gy[range.clone()].iter().zip(&xn[range])).enumerate() {
            *o = cache.inv_std[p] * inv_c * (cf * g * gamma - sum1[p] - n * sum2[p]);
        }
    }
    Ok(grad_in)
}
