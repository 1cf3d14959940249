use alloc::format;

use rand::Rng;

use super::{Scalar, Tensor};
use crate::{Error, Result};

/// 2-D convolution over a `[C, H, W]` plane stack with zero same-padding.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub dilation: (usize, usize),
    /// `[out, in, kh, kw]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

/// Parameter gradients of a [`ConvLayer`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvLayer<T> {
    /// All-zero weights and bias. Kernel sizes must be odd so that
    /// same-padding is symmetric.
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: (usize, usize), dilation: (usize, usize)) -> Self {
        assert!(kernel.0 % 2 == 1 && kernel.1 % 2 == 1, "kernel sizes must be odd, got {kernel:?}");
        assert!(dilation.0 >= 1 && dilation.1 >= 1, "dilation must be >= 1");
        Self {
            in_channels,
            out_channels,
            kernel,
            dilation,
            weight: Tensor::zeros(&[out_channels, in_channels, kernel.0, kernel.1]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        dilation: (usize, usize),
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(in_channels, out_channels, kernel, dilation);
        let taps = kernel.0 * kernel.1;
        let limit = libm::sqrt(6.0 / ((in_channels * taps + out_channels * taps) as f64));
        for w in layer.weight.data_mut() {
            *w = T::of(rng.random_range(-limit..limit));
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn padding(&self) -> (usize, usize) {
        (self.dilation.0 * (self.kernel.0 - 1) / 2, self.dilation.1 * (self.kernel.1 - 1) / 2)
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize)> {
        match *input.shape() {
            [c, h, w] if c == self.in_channels => Ok((h, w)),
            _ => Err(Error::Shape(format!(
                "conv expects [{}, H, W] input, got {:?}",
                self.in_channels,
                input.shape()
            ))),
        }
    }

    /// Iterates over every kernel tap with the row/column window where both
    /// the output position and the shifted input position are in bounds.
    #[inline]
    fn for_each_tap(&self, h: usize, w: usize, mut f: impl FnMut(usize, usize, Window)) {
        let (ph, pw) = self.padding();
        for ky in 0..self.kernel.0 {
            let oy = (ky * self.dilation.0) as isize - ph as isize;
            let y0 = (-oy).max(0) as usize;
            let y1 = (h as isize - oy).min(h as isize).max(0) as usize;
            for kx in 0..self.kernel.1 {
                let ox = (kx * self.dilation.1) as isize - pw as isize;
                let x0 = (-ox).max(0) as usize;
                let x1 = (w as isize - ox).min(w as isize).max(0) as usize;
                if y0 < y1 && x0 < x1 {
                    f(ky, kx, Window { y0, y1, x0, x1, oy, ox });
                }
            }
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (h, w) = self.check_input(input)?;
        let plane = h * w;
        let mut out = Tensor::zeros(&[self.out_channels, h, w]);
        let (kh, kw) = self.kernel;
        let weight = self.weight.data();
        let src = input.data();
        let dst = out.data_mut();
        for o in 0..self.out_channels {
            let out_plane = &mut dst[o * plane..(o + 1) * plane];
            let b = self.bias.data()[o];
            out_plane.iter_mut().for_each(|v| *v = b);
            for i in 0..self.in_channels {
                let in_plane = &src[i * plane..(i + 1) * plane];
                let wbase = (o * self.in_channels + i) * kh * kw;
                self.for_each_tap(h, w, |ky, kx, win| {
                    let wt = weight[wbase + ky * kw + kx];
                    for y in win.y0..win.y1 {
                        let sy = (y as isize + win.oy) as usize;
                        let sx0 = (win.x0 as isize + win.ox) as usize;
                        let s = &in_plane[sy * w + sx0..sy * w + sx0 + (win.x1 - win.x0)];
                        let d = &mut out_plane[y * w + win.x0..y * w + win.x1];
                        axpy(wt, s, d);
                    }
                });
            }
        }
        Ok(out)
    }

    /// Backward pass given the forward input.
    ///
    /// Parameter gradients are added into `acc` (weight, bias) when given. The
    /// input gradient is only computed when `need_input_grad` is set.
    pub fn backward_accumulate(
        &self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
        acc: Option<(&mut Tensor<T>, &mut Tensor<T>)>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor<T>>> {
        let (h, w) = self.check_input(input)?;
        if grad_out.shape() != [self.out_channels, h, w] {
            return Err(Error::Shape(format!(
                "conv grad_out {:?} does not match output [{}, {h}, {w}]",
                grad_out.shape(),
                self.out_channels
            )));
        }
        let plane = h * w;
        let (kh, kw) = self.kernel;
        let src = input.data();
        let go = grad_out.data();

        if let Some((gw, gb)) = acc {
            if gw.shape() != self.weight.shape() || gb.shape() != self.bias.shape() {
                return Err(Error::Shape("conv gradient accumulator has the wrong shape".into()));
            }
            let gw = gw.data_mut();
            let gb = gb.data_mut();
            for o in 0..self.out_channels {
                let g_plane = &go[o * plane..(o + 1) * plane];
                gb[o] += g_plane.iter().copied().sum::<T>();
                for i in 0..self.in_channels {
                    let in_plane = &src[i * plane..(i + 1) * plane];
                    let wbase = (o * self.in_channels + i) * kh * kw;
                    self.for_each_tap(h, w, |ky, kx, win| {
                        let mut total = T::zero();
                        for y in win.y0..win.y1 {
                            let sy = (y as isize + win.oy) as usize;
                            let sx0 = (win.x0 as isize + win.ox) as usize;
                            let s = &in_plane[sy * w + sx0..sy * w + sx0 + (win.x1 - win.x0)];
                            let g = &g_plane[y * w + win.x0..y * w + win.x1];
                            total += dot(s, g);
                        }
                        gw[wbase + ky * kw + kx] += total;
                    });
                }
            }
        }

        if !need_input_grad {
            return Ok(None);
        }
        let weight = self.weight.data();
        let mut grad_in = Tensor::zeros(&[self.in_channels, h, w]);
        let gi = grad_in.data_mut();
        for i in 0..self.in_channels {
            let gi_plane = &mut gi[i * plane..(i + 1) * plane];
            for o in 0..self.out_channels {
                let g_plane = &go[o * plane..(o + 1) * plane];
                let wbase = (o * self.in_channels + i) * kh * kw;
                self.for_each_tap(h, w, |ky, kx, win| {
                    let wt = weight[wbase + ky * kw + kx];
                    for y in win.y0..win.y1 {
                        let sy = (y as isize + win.oy) as usize;
                        let sx0 = (win.x0 as isize + win.ox) as usize;
                        let g = &g_plane[y * w + win.x0..y * w + win.x1];
                        let d = &mut gi_plane[sy * w + sx0..sy * w + sx0 + (win.x1 - win.x0)];
                        axpy(wt, g, d);
                    }
                });
            }
        }
        Ok(Some(grad_in))
    }
}

#[derive(Clone, Copy)]
struct Window {
    y0: usize,
    y1: usize,
    x0: usize,
    x1: usize,
    oy: isize,
    ox: isize,
}

#[inline]
fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (d, &s) in y.iter_mut().zip(x) {
        *d += a * s;
    }
}

/// Dot product with eight independent partial sums (fixed order, so results
/// are reproducible while still letting the compiler vectorize).
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            lanes[l] += xa[l] * xb[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    lanes.iter().copied().sum::<T>() + tail
}

/// Same-padded convolution of a `[C_in, H, W]` input.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    layer.forward(input)
}

/// Gradients of [`conv2d`] with respect to its input, weights and bias.
///
/// `cached_input` is the input seen by the forward pass; passing `None` is a
/// usage error.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cached_input: Option<&Tensor<T>>,
    layer: &ConvLayer<T>,
) -> Result<(Tensor<T>, ConvGrads<T>)> {
    let input = cached_input.ok_or_else(|| Error::Usage("conv2d_backward called without a forward cache".into()))?;
    let mut grads = ConvGrads { weight: layer.weight.zeros_like(), bias: layer.bias.zeros_like() };
    let grad_in = layer
        .backward_accumulate(input, grad_out, Some((&mut grads.weight, &mut grads.bias)), true)?
        .expect("input gradient requested");
    Ok((grad_in, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use alloc::vec;
    use rand::Rng;

    /// im2col-style reference: gathers each receptive field into a column and
    /// multiplies by the flattened kernel.
    fn conv_im2col(input: &Tensor<f64>, layer: &ConvLayer<f64>) -> Tensor<f64> {
        let [c, h, w] = *input.shape() else { panic!() };
        let (kh, kw) = layer.kernel;
        let (dh, dw) = layer.dilation;
        let (ph, pw) = ((dh * (kh - 1) / 2) as isize, (dw * (kw - 1) / 2) as isize);
        let rows = c * kh * kw;
        let mut cols = vec![0.0; rows * h * w];
        for ci in 0..c {
            for ky in 0..kh {
                for kx in 0..kw {
                    let r = (ci * kh + ky) * kw + kx;
                    for y in 0..h {
                        for x in 0..w {
                            let sy = y as isize + (ky * dh) as isize - ph;
                            let sx = x as isize + (kx * dw) as isize - pw;
                            if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                cols[r * h * w + y * w + x] = input.data()[ci * h * w + sy as usize * w + sx as usize];
                            }
                        }
                    }
                }
            }
        }
        let mut out = vec![0.0; layer.out_channels * h * w];
        for o in 0..layer.out_channels {
            for p in 0..h * w {
                let mut acc = layer.bias.data()[o];
                for r in 0..rows {
                    acc += layer.weight.data()[o * rows + r] * cols[r * h * w + p];
                }
                out[o * h * w + p] = acc;
            }
        }
        Tensor::from_vec(&[layer.out_channels, h, w], out).unwrap()
    }

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = seeded(seed, 0);
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut layer = ConvLayer::<f64>::zeros(1, 1, (3, 3), (1, 1));
        layer.weight.data_mut()[4] = 1.0;
        let input = random_tensor(&[1, 3, 3], 1);
        assert_eq!(conv2d(&input, &layer).unwrap(), input);
    }

    #[test]
    fn all_ones_counts_zero_padding() {
        let mut layer = ConvLayer::<f32>::zeros(1, 1, (3, 3), (1, 1));
        layer.weight.fill(1.0);
        let mut input = Tensor::zeros(&[1, 5, 5]);
        input.fill(1.0);
        let out = conv2d(&input, &layer).unwrap();
        assert_eq!(out.data()[2 * 5 + 2], 9.0);
        assert_eq!(out.data()[0], 4.0);
        assert_eq!(out.data()[4], 4.0);
        assert_eq!(out.data()[5], 6.0);
    }

    #[test]
    fn direct_matches_im2col() {
        let mut rng = seeded(7, 0);
        for (cin, cout, h, w, dil) in [(3, 4, 5, 7, (1, 1)), (2, 5, 14, 16, (1, 1)), (3, 2, 6, 9, (2, 1))] {
            let mut layer = ConvLayer::<f64>::glorot(cin, cout, (3, 3), dil, &mut rng);
            layer.bias.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            let input = random_tensor(&[cin, h, w], rng.random());
            let a = conv2d(&input, &layer).unwrap();
            let b = conv_im2col(&input, &layer);
            assert_eq!(a.shape(), [cout, h, w]);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let layer = ConvLayer::<f32>::zeros(2, 3, (3, 3), (1, 1));
        let input = Tensor::zeros(&[3, 4, 4]);
        assert!(matches!(conv2d(&input, &layer), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = seeded(3, 0);
        let layer = ConvLayer::<f64>::glorot(2, 3, (3, 3), (1, 1), &mut rng);
        let input = random_tensor(&[2, 4, 4], 9);
        let (gi, g) = conv2d_backward(&Tensor::zeros(&[3, 4, 4]), Some(&input), &layer).unwrap();
        assert!(gi.data().iter().chain(g.weight.data()).chain(g.bias.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let mut layer = ConvLayer::<f64>::zeros(1, 1, (1, 1), (1, 1));
        layer.weight.data_mut()[0] = 0.7;
        let input = Tensor::from_vec(&[1, 1, 1], vec![2.5]).unwrap();
        let upstream = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let (gi, g) = conv2d_backward(&upstream, Some(&input), &layer).unwrap();
        assert_eq!(g.weight.data()[0], 2.5);
        assert_eq!(g.bias.data()[0], 1.0);
        assert_eq!(gi.data()[0], 0.7);
    }

    #[test]
    fn backward_without_cache_is_usage_error() {
        let layer = ConvLayer::<f64>::zeros(1, 1, (3, 3), (1, 1));
        let g = Tensor::zeros(&[1, 2, 2]);
        assert!(matches!(conv2d_backward(&g, None, &layer), Err(Error::Usage(_))));
    }

    #[test]
    fn backward_matches_central_differences() {
        // loss = <c, conv(x)> with random c, so d loss / d out = c.
        let mut rng = seeded(11, 0);
        let mut layer = ConvLayer::<f64>::glorot(2, 3, (3, 3), (1, 1), &mut rng);
        layer.bias.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        let input = random_tensor(&[2, 4, 4], 12);
        let c = random_tensor(&[3, 4, 4], 13);
        let loss = |l: &ConvLayer<f64>, x: &Tensor<f64>| -> f64 {
            conv2d(x, l).unwrap().data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
        };
        let (gi, g) = conv2d_backward(&c, Some(&input), &layer).unwrap();
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        let mut worst: f64 = 0.0;
        for idx in 0..layer.weight.len() {
            let mut p = layer.clone();
            p.weight.data_mut()[idx] += h;
            let mut m = layer.clone();
            m.weight.data_mut()[idx] -= h;
            worst = worst.max(rel(g.weight.data()[idx], (loss(&p, &input) - loss(&m, &input)) / (2.0 * h)));
        }
        for idx in 0..layer.bias.len() {
            let mut p = layer.clone();
            p.bias.data_mut()[idx] += h;
            let mut m = layer.clone();
            m.bias.data_mut()[idx] -= h;
            worst = worst.max(rel(g.bias.data()[idx], (loss(&p, &input) - loss(&m, &input)) / (2.0 * h)));
        }
        for idx in 0..input.len() {
            let mut p = input.clone();
            p.data_mut()[idx] += h;
            let mut m = input.clone();
            m.data_mut()[idx] -= h;
            worst = worst.max(rel(gi.data()[idx], (loss(&layer, &p) - loss(&layer, &m)) / (2.0 * h)));
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
