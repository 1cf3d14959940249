use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::numerics::{Scalar, Tensor};
use crate::phy::GridConfig;
use crate::{Error, Result};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Binary cross-entropy in bits of logit `l` (log P(1)/P(0)) against bit `b`.
pub fn bce_bits(l: f64, b: u8) -> f64 {
    (softplus(l) - f64::from(b) * l) / LN_2
}

/// Logits of one network output `[K, F, S]` at the data REs, in canonical
/// order with the `K` bits of each RE consecutive.
pub fn data_llrs<T: Scalar>(output: &Tensor<T>, grid: &GridConfig) -> Result<Vec<T>> {
    let (k, plane) = check_output(output, grid)?;
    let positions = grid.data_positions();
    let mut out = Vec::with_capacity(positions.len() * k);
    let d = output.data();
    for &p in &positions {
        out.extend((0..k).map(|b| d[b * plane + p]));
    }
    Ok(out)
}

fn check_output<T: Scalar>(output: &Tensor<T>, grid: &GridConfig) -> Result<(usize, usize)> {
    match output.shape() {
        &[k, f, s] if f == grid.num_symbols && s == grid.num_subcarriers => Ok((k, f * s)),
        s => Err(Error::Shape(format!(
            "output {s:?} does not match a {}x{} grid",
            grid.num_symbols, grid.num_subcarriers
        ))),
    }
}

/// Sum of per-bit BCE (bits) over the data REs of one example, together with
/// `scale * d(sum)/d(output)`. Pilot and guard REs get zero gradient.
pub fn bce_sum_and_grad<T: Scalar>(
    output: &Tensor<T>,
    coded: &[u8],
    grid: &GridConfig,
    scale: f64,
) -> Result<(f64, Tensor<T>)> {
    let (k, plane) = check_output(output, grid)?;
    let positions = grid.data_positions();
    if coded.len() != positions.len() * k {
        return Err(Error::Shape(format!("{} bits for {} data REs of {k} bits", coded.len(), positions.len())));
    }
    let d = output.data();
    let mut grad = output.zeros_like();
    let g = grad.data_mut();
    let mut sum = 0.0;
    for (i, &p) in positions.iter().enumerate() {
        for b in 0..k {
            let idx = b * plane + p;
            let l = d[idx].as_f64();
            let bit = coded[i * k + b];
            sum += bce_bits(l, bit);
            g[idx] = T::of(scale * (sigmoid(l) - f64::from(bit)) / LN_2);
        }
    }
    Ok((sum, grad))
}

/// Bit-metric-decoding rate estimate and mean BCE over a set of examples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BmdLoss {
    /// `1 - mean BCE`; the quantity training maximizes.
    pub rate: f64,
    pub mean_bce: f64,
}

impl BmdLoss {
    pub fn from_sum(bce_sum: f64, bits: usize) -> Self {
        let mean_bce = bce_sum / bits as f64;
        Self { rate: 1.0 - mean_bce, mean_bce }
    }
}

pub fn bmd_loss<T: Scalar>(outputs: &[Tensor<T>], coded: &[&[u8]], grid: &GridConfig) -> Result<BmdLoss> {
    if outputs.len() != coded.len() || outputs.is_empty() {
        return Err(Error::Usage(format!("{} outputs for {} bit vectors", outputs.len(), coded.len())));
    }
    let mut sum = 0.0;
    let mut bits = 0;
    for (o, c) in outputs.iter().zip(coded) {
        sum += bce_sum_and_grad(o, c, grid, 0.0)?.0;
        bits += c.len();
    }
    Ok(BmdLoss::from_sum(sum, bits))
}
